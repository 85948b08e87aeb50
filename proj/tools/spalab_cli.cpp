// Copyright 2026 The spalab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "spalab/adv_train.hpp"
#include "spalab/campaign.hpp"
#include "spalab/dataset.hpp"
#include "spalab/image_io.hpp"
#include "spalab/model.hpp"
#include "spalab/rng.hpp"
#include "spalab/saa.hpp"
#include "spalab/sparse_rs.hpp"
#include "spalab/spgd.hpp"
#include "spalab/spgd_structured.hpp"

using namespace spalab;

namespace {

// ---------------------------------------------------------------------------
// Flat key=value config files; every key is overridable by the CLI flag of
// the same name (flags win because they are parsed after the file is
// applied).

std::map<std::string, std::string> load_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config: expected key=value: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

struct OptionTable {
  CLI::App* cmd;
  std::map<std::string, std::function<void(const std::string&)>> setters;

  void add(const std::string& name, int& field, const std::string& desc) {
    cmd->add_option("--" + name, field, desc);
    setters[name] = [&field](const std::string& s) { field = std::stoi(s); };
  }
  void add(const std::string& name, double& field, const std::string& desc) {
    cmd->add_option("--" + name, field, desc);
    setters[name] = [&field](const std::string& s) { field = std::stod(s); };
  }
  void add(const std::string& name, uint64_t& field, const std::string& desc) {
    cmd->add_option("--" + name, field, desc);
    setters[name] = [&field](const std::string& s) { field = std::stoull(s); };
  }
  void add(const std::string& name, std::string& field, const std::string& desc) {
    cmd->add_option("--" + name, field, desc);
    setters[name] = [&field](const std::string& s) { field = s; };
  }
  void add(const std::string& name, bool& field, const std::string& desc) {
    cmd->add_option("--" + name, field, desc);
    setters[name] = [&field](const std::string& s) { field = s == "1" || s == "true"; };
  }

  void apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
      const auto it = setters.find(k);
      if (it != setters.end()) it->second(v);
    }
  }
};

// ---------------------------------------------------------------------------
// Shared option groups.

struct DataOpts {
  std::string dataset = "synthetic";  // synthetic | cifar10
  std::string data_path;
  int n = 1000;
  int h = 24, w = 24, c = 3;
  int classes = 4;
  double amplitude = 0.22;
  double noise = 0.10;
  uint64_t data_seed = 2024;
  std::string split = "test";

  void reg(OptionTable& t) {
    t.add("dataset", dataset, "synthetic or cifar10");
    t.add("data_path", data_path, "cifar10 .bin file or directory");
    t.add("n", n, "synthetic instance count");
    t.add("img_h", h, "synthetic image height");
    t.add("img_w", w, "synthetic image width");
    t.add("img_c", c, "synthetic channels");
    t.add("classes", classes, "synthetic class count");
    t.add("amplitude", amplitude, "synthetic pattern amplitude");
    t.add("noise", noise, "synthetic pixel noise");
    t.add("data_seed", data_seed, "synthetic dataset seed");
    t.add("split", split, "synthetic split tag (train/test)");
  }

  Dataset load() const {
    if (dataset == "cifar10") return load_cifar10(data_path);
    SyntheticSpec spec;
    spec.n = n;
    spec.h = h;
    spec.w = w;
    spec.c = c;
    spec.classes = classes;
    spec.amplitude = amplitude;
    spec.noise = noise;
    return make_synthetic(spec, data_seed, split);
  }
};

struct AttackOpts {
  std::string attack = "spgd_unproj";  // spgd_unproj | spgd_proj | rs
  int eps = 10;
  double eps_inf = 1.0;
  int iters = 300;
  int tol = -1;
  double alpha = -1.0;
  double beta = -1.0;
  int queries = 5000;
  double alpha_init = 0.8;
  std::string pattern = "pixel";  // pixel | row | column | patch | file
  int patch = 3;
  int stride = 1;
  std::string pattern_file;
  uint64_t seed = 1;

  void reg(OptionTable& t) {
    t.add("attack", attack, "spgd_unproj, spgd_proj or rs");
    t.add("eps", eps, "sparsity budget (pixels, or groups with a pattern)");
    t.add("eps_inf", eps_inf, "l-inf bound on magnitudes (watermark mode when < 1)");
    t.add("iters", iters, "sPGD iteration cap");
    t.add("tol", tol, "reinitialization tolerance (-1: flavor default)");
    t.add("alpha", alpha, "magnitude step (-1: flavor default)");
    t.add("beta", beta, "mask step (-1: flavor default)");
    t.add("queries", queries, "RS query budget");
    t.add("alpha_init", alpha_init, "RS initial resample fraction");
    t.add("pattern", pattern, "pixel, row, column, patch or file");
    t.add("patch", patch, "patch side length for pattern=patch");
    t.add("stride", stride, "pattern stride");
    t.add("pattern_file", pattern_file, "0/1 grid file for pattern=file");
    t.add("seed", seed, "attack seed");
  }

  bool structured() const { return pattern != "pixel"; }

  GroupSpec spec_for(int img_h, int img_w) const {
    if (pattern == "row") return GroupSpec::row(img_h, img_w);
    if (pattern == "column") return GroupSpec::column(img_h, img_w);
    if (pattern == "patch") return GroupSpec::patch(patch, img_h, img_w, stride);
    if (pattern == "file") return GroupSpec::from_file(pattern_file, img_h, img_w, stride);
    if (pattern == "pixel") return GroupSpec::pixel(img_h, img_w);
    throw std::runtime_error("unknown pattern: " + pattern);
  }

  NamedAttack named(const Model& model, int img_h, int img_w) const {
    if (attack == "rs") {
      RsConfig rc;
      rc.eps = eps;
      rc.eps_inf = eps_inf;
      rc.max_queries = queries;
      rc.alpha_init = alpha_init;
      if (structured()) rc.spec = spec_for(img_h, img_w);
      const uint64_t base = seed;
      return {"rs", [&model, rc, base](const Tensor& x, int y, int instance) {
                RsConfig c = rc;
                c.seed = mix_seed({base, static_cast<uint64_t>(instance)});
                const LogitsFn fn = [&model](const Tensor& adv) { return model.logits(adv); };
                return rs_attack(fn, x, y, c);
              }};
    }
    SpgdConfig sc;
    sc.eps = eps;
    sc.eps_inf = eps_inf;
    sc.alpha = alpha;
    sc.beta = beta;
    sc.iters = iters;
    sc.tolerance = tol;
    sc.mode = attack == "spgd_proj" ? BackwardMode::kProjected : BackwardMode::kUnprojected;
    const uint64_t base = seed;
    if (structured()) {
      GroupSpec spec = spec_for(img_h, img_w);
      return {attack + "_" + spec.name,
              [&model, sc, base, spec](const Tensor& x, int y, int instance) {
                SpgdConfig c = sc;
                c.seed = mix_seed({base, static_cast<uint64_t>(instance)});
                return spgd_structured_attack(model, x, y, spec, c);
              }};
    }
    return {attack, [&model, sc, base](const Tensor& x, int y, int instance) {
              SpgdConfig c = sc;
              c.seed = mix_seed({base, static_cast<uint64_t>(instance)});
              return spgd_attack(model, x, y, c);
            }};
  }
};

void print_campaign_summary(const CampaignResult& res) {
  std::printf("instances: %d  clean accuracy: %.4f\n", res.instance_count(),
              res.clean_accuracy());
  for (const auto& name : res.attack_names()) {
    std::printf("  %-24s robust acc %.4f  attack success rate %.4f\n", name.c_str(),
                res.robust_accuracy(name), res.attack_success_rate(name));
    const auto hist = res.iteration_histogram(name);
    std::printf("    iterations-to-success histogram:");
    int64_t edge = 1;
    for (size_t b = 0; b < hist.size(); ++b) {
      if (hist[b] > 0) std::printf(" [%ld+]=%ld", static_cast<long>(edge), static_cast<long>(hist[b]));
      edge *= 2;
    }
    std::printf("\n");
  }
  std::printf("feasibility violations: %ld\n", static_cast<long>(res.violations));
}

// ---------------------------------------------------------------------------
// Subcommand payloads.

struct TrainArgs {
  DataOpts data;
  int epochs = 40;
  int batch = 128;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  uint64_t seed = 9;
  bool flip = false;
  std::string arch = "cnn";
  int hidden = 64;
  std::string out = "model.spalm";
  std::string metrics;
};

int run_train(TrainArgs& a) {
  a.data.split = "train";
  Dataset train = a.data.load();
  DataOpts test_opts = a.data;
  test_opts.split = "test";
  test_opts.n = std::max(100, a.data.n / 4);
  Dataset test = test_opts.dataset == "synthetic" ? test_opts.load() : Dataset{};
  const Dataset* eval = test.n() > 0 ? &test : nullptr;

  Model model = a.arch == "mlp"
                    ? Model::mlp(train.h() * train.w() * train.c(), a.hidden, a.data.classes,
                                 a.seed)
                    : Model::reference_cnn(train.c(), a.data.classes, a.seed, train.h(),
                                           train.w(), a.hidden);
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.lr = a.lr;
  cfg.momentum = a.momentum;
  cfg.weight_decay = a.weight_decay;
  cfg.seed = a.seed;
  cfg.flip_augment = a.flip;

  const auto hist = sgd_train(model, train, cfg, eval);
  for (const auto& st : hist)
    std::printf("epoch %3d  loss %.4f  train acc %.4f  eval acc %.4f\n", st.epoch,
                st.train_loss, st.train_acc, st.eval_acc);
  model.save(a.out);
  std::printf("checkpoint written to %s\n", a.out.c_str());
  if (!a.metrics.empty()) {
    std::ofstream out(a.metrics);
    out << "epoch,train_loss,train_acc,eval_acc\n";
    for (const auto& st : hist)
      out << st.epoch << ',' << st.train_loss << ',' << st.train_acc << ',' << st.eval_acc
          << "\n";
  }
  return 0;
}

struct AdvTrainArgs {
  DataOpts data;
  int epochs = 30;
  int batch = 128;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  uint64_t seed = 9;
  std::string method = "sat";   // sat | strades
  std::string policy = "random";
  int eval_eps = 10;
  double multi_eps = 6.0;
  int attack_iters = 20;
  int attack_tol = 10;
  double eps_inf = 1.0;
  double trades_weight = 6.0;
  int probe_size = 100;
  int probe_iters = 20;
  std::string out = "model_adv.spalm";
  std::string metrics = "advtrain_metrics.csv";
};

int run_advtrain(AdvTrainArgs& a) {
  a.data.split = "train";
  Dataset train = a.data.load();
  DataOpts test_opts = a.data;
  test_opts.split = "test";
  test_opts.n = std::max(100, a.data.n / 4);
  Dataset test = test_opts.dataset == "synthetic" ? test_opts.load() : Dataset{};
  const Dataset* eval = test.n() > 0 ? &test : nullptr;

  AdvTrainConfig cfg;
  cfg.base.epochs = a.epochs;
  cfg.base.batch_size = a.batch;
  cfg.base.lr = a.lr;
  cfg.base.momentum = a.momentum;
  cfg.base.weight_decay = a.weight_decay;
  cfg.base.seed = a.seed;
  cfg.method = a.method == "strades" ? AdvMethod::kStrades : AdvMethod::kSat;
  cfg.eval_eps = a.eval_eps;
  cfg.eps_multiplier = a.multi_eps;
  cfg.attack_iters = a.attack_iters;
  cfg.attack_tolerance = a.attack_tol;
  cfg.eps_inf = a.eps_inf;
  cfg.trades_weight = a.trades_weight;
  cfg.probe_size = a.probe_size;
  cfg.probe_iters = a.probe_iters;
  if (a.policy == "projected")
    cfg.policy = BackwardPolicy::kProjected;
  else if (a.policy == "unprojected")
    cfg.policy = BackwardPolicy::kUnprojected;
  else if (a.policy == "alternate")
    cfg.policy = BackwardPolicy::kAlternate;
  else
    cfg.policy = BackwardPolicy::kRandom;

  Model model = Model::reference_cnn(train.c(), a.data.classes, a.seed, train.h(), train.w());
  const auto hist = cfg.method == AdvMethod::kStrades ? strades_train(model, train, cfg, eval)
                                                      : sat_train(model, train, cfg, eval);
  for (const auto& st : hist)
    std::printf("epoch %3d  loss %.4f  clean acc %.4f  robust probe %.4f\n", st.epoch,
                st.train_loss, st.clean_acc, st.robust_acc_probe);
  model.save(a.out);
  std::printf("checkpoint written to %s\n", a.out.c_str());
  std::ofstream out(a.metrics);
  out << "epoch,clean_acc,train_loss,robust_acc_probe\n";
  for (const auto& st : hist)
    out << st.epoch << ',' << st.clean_acc << ',' << st.train_loss << ','
        << st.robust_acc_probe << "\n";
  return 0;
}

struct AttackArgs {
  DataOpts data;
  AttackOpts attack;
  std::string model = "model.spalm";
  std::string out = "campaign.csv";
  bool record_time = true;
};

int run_attack(AttackArgs& a) {
  Dataset data = a.data.load();
  Model model = Model::load(a.model);
  const NamedAttack attack = a.attack.named(model, data.h(), data.w());
  CampaignResult res = run_campaign(model, data, {attack}, a.record_time);
  write_campaign_csv(res, a.out);
  print_campaign_summary(res);
  std::printf("rows written to %s\n", a.out.c_str());
  return 0;
}

struct EnsembleArgs {
  DataOpts data;
  std::string model = "model.spalm";
  int eps = 10;
  double eps_inf = 1.0;
  int spgd_iters = 1000;
  int rs_queries = 2000;
  std::string pattern = "pixel";
  int patch = 3;
  int stride = 1;
  std::string pattern_file;
  uint64_t seed = 1;
  std::string out = "ensemble.csv";
  bool record_time = true;
};

int run_ensemble(EnsembleArgs& a) {
  Dataset data = a.data.load();
  Model model = Model::load(a.model);
  SaaConfig cfg;
  cfg.eps = a.eps;
  cfg.eps_inf = a.eps_inf;
  cfg.spgd_iters = a.spgd_iters;
  cfg.rs_queries = a.rs_queries;
  cfg.seed = a.seed;
  if (a.pattern != "pixel") {
    AttackOpts helper;
    helper.pattern = a.pattern;
    helper.patch = a.patch;
    helper.stride = a.stride;
    helper.pattern_file = a.pattern_file;
    cfg.spec = helper.spec_for(data.h(), data.w());
  }

  const CascadeReport rep = saa(model, data, cfg);
  std::printf("clean accuracy %.4f  sAA robust accuracy %.4f  broken %d/%d\n",
              rep.clean_accuracy(), rep.robust_accuracy(), rep.broken_count(),
              static_cast<int>(rep.rows.size()));
  int64_t per_stage[kSaaStages] = {0, 0, 0};
  for (const auto& row : rep.rows)
    if (row.broken_by >= 0) ++per_stage[row.broken_by];
  for (int s = 0; s < kSaaStages; ++s)
    std::printf("  stage %d (%s): broke %ld\n", s, kSaaStageNames[static_cast<size_t>(s)],
                static_cast<long>(per_stage[s]));

  CampaignResult res;
  for (const auto& row : rep.rows) {
    CampaignRow r;
    r.index = row.index;
    r.clean_correct = row.clean_correct;
    r.attack = "saa";
    r.success = row.broken_by >= 0;
    r.iterations = row.iterations[0] + row.iterations[1] + row.iterations[2];
    r.l0 = row.pixel_l0;
    r.group_l0 = row.group_l0;
    r.time_ms = 0;
    res.rows.push_back(r);
  }
  write_campaign_csv(res, a.out);
  std::printf("rows written to %s\n", a.out.c_str());
  return 0;
}

struct TransferArgs {
  DataOpts data;
  AttackOpts attack;
  std::string source = "model.spalm";
  std::string target = "model_b.spalm";
};

int run_transfer(TransferArgs& a) {
  Dataset data = a.data.load();
  Model source = Model::load(a.source);
  Model target = Model::load(a.target);
  const NamedAttack attack = a.attack.named(source, data.h(), data.w());
  const TransferResult res = transfer_eval(source, target, data, attack);
  std::printf("direct ASR (on source): %.4f\n", res.direct_asr);
  std::printf("transfer ASR (on target): %.4f over %d target-correct instances\n",
              res.transfer_asr, res.evaluated);
  return 0;
}

struct RatioArgs {
  int h = 32, w = 32;
  std::string pattern = "patch";
  int patch = 3;
  int stride = 1;
  std::string pattern_file;
  int eps_min = 1;
  int eps_max = 5;
  int samples = 100;
  int cap = 8;
  uint64_t seed = 1;
  std::string out;
};

int run_ratio(RatioArgs& a) {
  AttackOpts helper;
  helper.pattern = a.pattern;
  helper.patch = a.patch;
  helper.stride = a.stride;
  helper.pattern_file = a.pattern_file;
  const GroupSpec spec = helper.spec_for(a.h, a.w);
  const auto rows = ratio_simulation(spec, a.eps_min, a.eps_max, a.samples, a.seed, a.cap);
  std::printf("pattern %s on %dx%d, %d samples per sparsity\n", spec.name.c_str(), a.h, a.w,
              a.samples);
  std::printf("%6s %12s %12s\n", "eps", "mean ratio", "std");
  for (const auto& r : rows) {
    if (r.skipped)
      std::printf("%6d %12s %12s\n", r.eps, "skipped", "-");
    else
      std::printf("%6d %12.4f %12.4f\n", r.eps, r.mean_ratio, r.std_ratio);
  }
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    out << "eps,samples,mean_ratio,std_ratio,skipped\n";
    for (const auto& r : rows)
      out << r.eps << ',' << r.samples << ',' << r.mean_ratio << ',' << r.std_ratio << ','
          << (r.skipped ? 1 : 0) << "\n";
  }
  return 0;
}

struct ExportArgs {
  DataOpts data;
  AttackOpts attack;
  std::string model = "model.spalm";
  int count = 8;
  bool highlight = false;
  std::string outdir = ".";
};

int run_export(ExportArgs& a) {
  Dataset data = a.data.load();
  Model model = Model::load(a.model);
  const NamedAttack attack = a.attack.named(model, data.h(), data.w());
  const int count = std::min(a.count, data.n());
  for (int i = 0; i < count; ++i) {
    const Tensor x = data.image(i);
    const AttackOutcome o = attack.run(x, data.label(i), i);
    const std::string path =
        a.outdir + "/adv_" + std::to_string(i) + (o.success ? "_broken" : "_robust") + ".ppm";
    export_perturbation_image(x, o.delta, path, a.highlight);
    std::printf("%s  success=%d  pixel_l0=%d\n", path.c_str(), o.success ? 1 : 0, o.pixel_l0);
  }
  return 0;
}

struct ReportArgs {
  std::string in = "campaign.csv";
};

int run_report(ReportArgs& a) {
  const CampaignResult res = read_campaign_csv(a.in);
  print_campaign_summary(res);
  return 0;
}

std::string config_path_from_argv(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse adversarial perturbation lab"};
  app.require_subcommand(1);

  std::string config_path;

  TrainArgs train_args;
  AdvTrainArgs advtrain_args;
  AttackArgs attack_args;
  EnsembleArgs ensemble_args;
  TransferArgs transfer_args;
  RatioArgs ratio_args;
  ExportArgs export_args;
  ReportArgs report_args;

  std::vector<OptionTable> tables;
  tables.reserve(8);

  auto make = [&](const char* name, const char* desc) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    cmd->add_option("--config", config_path, "flat key=value config file");
    tables.push_back(OptionTable{cmd, {}});
    return &tables.back();
  };

  {
    OptionTable* t = make("train", "train a clean classifier");
    train_args.data.reg(*t);
    t->add("epochs", train_args.epochs, "");
    t->add("batch", train_args.batch, "");
    t->add("lr", train_args.lr, "");
    t->add("momentum", train_args.momentum, "");
    t->add("weight_decay", train_args.weight_decay, "");
    t->add("seed", train_args.seed, "");
    t->add("flip", train_args.flip, "random horizontal flip");
    t->add("arch", train_args.arch, "cnn or mlp");
    t->add("hidden", train_args.hidden, "");
    t->add("out", train_args.out, "checkpoint path");
    t->add("metrics", train_args.metrics, "optional metrics csv");
    t->cmd->callback([&] { std::exit(run_train(train_args)); });
  }
  {
    OptionTable* t = make("advtrain", "adversarial training (sAT / sTRADES)");
    advtrain_args.data.reg(*t);
    t->add("epochs", advtrain_args.epochs, "");
    t->add("batch", advtrain_args.batch, "");
    t->add("lr", advtrain_args.lr, "");
    t->add("momentum", advtrain_args.momentum, "");
    t->add("weight_decay", advtrain_args.weight_decay, "");
    t->add("seed", advtrain_args.seed, "");
    t->add("method", advtrain_args.method, "sat or strades");
    t->add("policy", advtrain_args.policy, "projected|unprojected|alternate|random");
    t->add("eval_eps", advtrain_args.eval_eps, "evaluation budget");
    t->add("multi_eps", advtrain_args.multi_eps, "train budget multiplier");
    t->add("attack_iters", advtrain_args.attack_iters, "");
    t->add("attack_tol", advtrain_args.attack_tol, "");
    t->add("eps_inf", advtrain_args.eps_inf, "");
    t->add("trades_weight", advtrain_args.trades_weight, "");
    t->add("probe_size", advtrain_args.probe_size, "");
    t->add("probe_iters", advtrain_args.probe_iters, "");
    t->add("out", advtrain_args.out, "checkpoint path");
    t->add("metrics", advtrain_args.metrics, "metrics csv");
    t->cmd->callback([&] { std::exit(run_advtrain(advtrain_args)); });
  }
  {
    OptionTable* t = make("attack", "run one attack over a dataset");
    attack_args.data.reg(*t);
    attack_args.attack.reg(*t);
    t->add("model", attack_args.model, "checkpoint");
    t->add("out", attack_args.out, "campaign csv path");
    t->add("record_time", attack_args.record_time, "write wall times (0 for reproducible csv)");
    t->cmd->callback([&] { std::exit(run_attack(attack_args)); });
  }
  {
    OptionTable* t = make("ensemble", "cascaded sAA evaluation");
    ensemble_args.data.reg(*t);
    t->add("model", ensemble_args.model, "checkpoint");
    t->add("eps", ensemble_args.eps, "budget");
    t->add("eps_inf", ensemble_args.eps_inf, "");
    t->add("spgd_iters", ensemble_args.spgd_iters, "per sPGD stage");
    t->add("rs_queries", ensemble_args.rs_queries, "");
    t->add("pattern", ensemble_args.pattern, "");
    t->add("patch", ensemble_args.patch, "");
    t->add("stride", ensemble_args.stride, "");
    t->add("pattern_file", ensemble_args.pattern_file, "");
    t->add("seed", ensemble_args.seed, "");
    t->add("out", ensemble_args.out, "csv path");
    t->add("record_time", ensemble_args.record_time, "");
    t->cmd->callback([&] { std::exit(run_ensemble(ensemble_args)); });
  }
  {
    OptionTable* t = make("transfer", "generate on source, evaluate on target");
    transfer_args.data.reg(*t);
    transfer_args.attack.reg(*t);
    t->add("source", transfer_args.source, "source checkpoint");
    t->add("target", transfer_args.target, "target checkpoint");
    t->cmd->callback([&] { std::exit(run_transfer(transfer_args)); });
  }
  {
    OptionTable* t = make("ratio-sim", "group-l0 ratio simulation");
    t->add("img_h", ratio_args.h, "");
    t->add("img_w", ratio_args.w, "");
    t->add("pattern", ratio_args.pattern, "");
    t->add("patch", ratio_args.patch, "");
    t->add("stride", ratio_args.stride, "");
    t->add("pattern_file", ratio_args.pattern_file, "");
    t->add("eps_min", ratio_args.eps_min, "");
    t->add("eps_max", ratio_args.eps_max, "");
    t->add("samples", ratio_args.samples, "");
    t->add("cap", ratio_args.cap, "exact-cover cap");
    t->add("seed", ratio_args.seed, "");
    t->add("out", ratio_args.out, "optional csv path");
    t->cmd->callback([&] { std::exit(run_ratio(ratio_args)); });
  }
  {
    OptionTable* t = make("export-images", "write [x | x+delta | map] panels");
    export_args.data.reg(*t);
    export_args.attack.reg(*t);
    t->add("model", export_args.model, "checkpoint");
    t->add("count", export_args.count, "instances to export");
    t->add("highlight", export_args.highlight, "draw a highlight box outside the perturbation");
    t->add("outdir", export_args.outdir, "");
    t->cmd->callback([&] { std::exit(run_export(export_args)); });
  }
  {
    OptionTable* t = make("report", "aggregate a campaign csv");
    t->add("in", report_args.in, "campaign csv");
    t->cmd->callback([&] { std::exit(run_report(report_args)); });
  }

  const std::string cfg_path = config_path_from_argv(argc, argv);
  if (!cfg_path.empty()) {
    const auto kv = load_kv(cfg_path);
    for (auto& t : tables) t.apply(kv);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
