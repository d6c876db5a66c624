#include "cli.hpp"

#include <chrono>
#include <ostream>
#include <random>

#include "CLI11.hpp"
#include "prelu/baselines.hpp"
#include "prelu/constraints.hpp"
#include "prelu/datagen.hpp"
#include "prelu/model_io.hpp"
#include "prelu/partition.hpp"
#include "prelu/trainer.hpp"
#include "prelu/tree.hpp"

namespace prelu::cli {
namespace {

struct GenArgs {
  int dataset = 1;
  Index n_train = 10000;
  Index n_test = 5000;
  std::uint64_t seed = 0;
  std::string out = ".";
};

struct TrainArgs {
  std::string data, config, rules, model, report;
  std::vector<Index> hidden{100, 100, 100, 100, 100};
  std::uint64_t init_seed = 0;
};

struct ExtractArgs {
  std::string model, mode = "exact", calibration, out, dot;
};

struct PartitionArgs {
  std::string model, points, out;
};

struct EvalArgs {
  std::string model, tree, rc_train, test, oracle, report;
};

struct VerifyArgs {
  std::string model, tree;
  Index points = 10000;
  std::uint64_t seed = 0;
  double lo = 0.0, hi = 1.0;
};

std::string default_report_path(const std::string& model) {
  std::filesystem::path p(model);
  return (p.parent_path() / (p.stem().string() + ".report.json")).string();
}

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const auto spec = DatasetSpec::benchmark(a.dataset, a.n_train, a.n_test, a.seed);
  const auto data = make_dataset(spec);
  const auto paths = write_dataset(data, a.out);
  out << "wrote " << paths.train.string() << " (" << data.train.size() << " rows)\n"
      << "wrote " << paths.test.string() << " (" << data.test.cols() << " rows)\n"
      << "wrote " << paths.oracle.string() << "\n";
  return 0;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = TrainConfig::parse(read_text(a.config));
  cfg.validate();

  ObservationalData data = load_observational_csv(a.data);
  RuleSet rules;
  if (!a.rules.empty()) rules = load_rule_set(a.rules);

  Model model;
  model.transforms = rules.transforms;
  model.seed = cfg.seed;
  data.X = apply_transforms_all(rules.transforms, data.X);

  int num_treatments = 2;
  for (int p : data.p) num_treatments = std::max(num_treatments, p + 1);
  data.validate(num_treatments);

  const FilterResult filtered = filter_violating(data, rules.rules);
  Network net = make_network(data.dim(), a.hidden, num_treatments, a.init_seed);
  for (const auto& rule : rules.rules) net = inject_rule(std::move(net), rule);

  const auto start = std::chrono::steady_clock::now();
  TrainResult result = train(std::move(net), filtered.kept, cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  model.net = std::move(result.net);
  save_model(model, a.model);

  nlohmann::json report{{"config", cfg.to_string()},
                        {"hidden_sizes", model.net.hidden_sizes()},
                        {"init_seed", a.init_seed},
                        {"samples_used", filtered.kept.size()},
                        {"samples_removed", filtered.removed.size()},
                        {"epoch_loss", result.report.epoch_loss}};
  const std::string report_path = a.report.empty() ? default_report_path(a.model) : a.report;
  write_json(report_path, report);

  out << "trained on " << filtered.kept.size() << " samples (" << filtered.removed.size()
      << " removed by rules)\n"
      << "final epoch loss " << result.report.epoch_loss.back() << "\n"
      << "wrote " << a.model << "\n";
  err << "training took " << seconds << " s\n";
  return 0;
}

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  const Model model = load_model(a.model);
  ExtractOptions opts;
  Matrix calibration;
  if (a.mode == "exact") {
    opts.mode = ExtractMode::kExact;
  } else if (a.mode == "data-driven" || a.mode == "data_driven") {
    opts.mode = ExtractMode::kDataDriven;
  } else {
    throw CLI::ValidationError("--mode", "expected exact or data-driven, got '" + a.mode + "'");
  }
  if (!a.calibration.empty()) {
    calibration = model.prepare(load_features_csv(a.calibration));
    opts.calibration = &calibration;
  }
  const ObliqueTree tree = extract_tree(model.net, opts);
  write_json(a.out, tree_to_json(tree));
  if (!a.dot.empty()) write_text(a.dot, export_dot(tree));
  out << "tree depth " << tree.depth() << ", " << tree.num_internal() << " splits, " << tree.num_leaves()
      << " leaves\n";
  return 0;
}

int cmd_partitions(const PartitionArgs& a, std::ostream& out) {
  const Model model = load_model(a.model);
  const Matrix points = model.prepare(load_features_csv(a.points));
  const auto regions = partition(model.net, points);
  write_json(a.out, region_report(regions));
  out << regions.size() << " regions over " << points.cols() << " points\n";
  return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Matrix raw = load_features_csv(a.test);
  const OracleTable oracle = load_oracle_csv(a.oracle);
  EvalReport report;
  if (!a.model.empty()) {
    const Model model = load_model(a.model);
    report = evaluate_policy(model.net, model.prepare(raw), oracle);
  } else if (!a.tree.empty()) {
    const ObliqueTree tree = tree_from_json(read_json(a.tree));
    report = evaluate_policy([&](const Eigen::Ref<const Vector>& x) { return tree.predict(x); }, raw, oracle);
  } else {
    ObservationalData train = load_observational_csv(a.rc_train);
    int num_treatments = static_cast<int>(oracle.num_treatments());
    const RcLinearModel rc = fit_rc_ols(train, num_treatments);
    report = evaluate_policy(rc, raw, oracle);
  }
  if (!a.report.empty()) write_json(a.report, report.to_json());
  out << report.to_table();
  return 0;
}

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const Model model = load_model(a.model);
  const ObliqueTree tree = tree_from_json(read_json(a.tree));
  if (!(a.lo < a.hi)) throw ContractError("verify: --lo must be below --hi");
  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> u(a.lo, a.hi);
  Matrix points(model.net.input_dim(), a.points);
  for (Index t = 0; t < points.cols(); ++t) {
    for (Index k = 0; k < points.rows(); ++k) points(k, t) = u(rng);
  }
  const auto report = verify_equivalence(model.net, tree, points);
  out << "checked: " << report.checked << "\n"
      << "mismatches: " << report.mismatches << "\n"
      << "boundary: " << report.boundary << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prescriptive ReLU networks: training, tree extraction and evaluation"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic observational dataset");
  gen_cmd->add_option("--dataset", gen.dataset, "Benchmark id 1..6")->required();
  gen_cmd->add_option("--n-train", gen.n_train, "Training rows");
  gen_cmd->add_option("--n-test", gen.n_test, "Test rows");
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--out", gen.out, "Output directory");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a network on observational data");
  train_cmd->add_option("--data", tr.data, "Observational CSV")->required();
  train_cmd->add_option("--config", tr.config, "key=value training config");
  train_cmd->add_option("--rules", tr.rules, "Rule file");
  train_cmd->add_option("--model", tr.model, "Output model JSON")->required();
  train_cmd->add_option("--report", tr.report, "Output report JSON (default: <model>.report.json)");
  train_cmd->add_option("--hidden", tr.hidden, "Hidden layer sizes, comma separated")->delimiter(',');
  train_cmd->add_option("--init-seed", tr.init_seed, "Seed for weight initialization");

  ExtractArgs ex;
  auto* extract_cmd = app.add_subcommand("extract-tree", "Convert a model into an oblique tree");
  extract_cmd->add_option("--model", ex.model, "Model JSON")->required();
  extract_cmd->add_option("--mode", ex.mode, "exact or data-driven");
  extract_cmd->add_option("--calibration", ex.calibration, "Calibration CSV (data-driven mode)");
  extract_cmd->add_option("--out", ex.out, "Output tree JSON")->required();
  extract_cmd->add_option("--dot", ex.dot, "Output DOT file");

  PartitionArgs pa;
  auto* part_cmd = app.add_subcommand("partitions", "Report the linear regions visited by points");
  part_cmd->add_option("--model", pa.model, "Model JSON")->required();
  part_cmd->add_option("--points", pa.points, "Feature CSV")->required();
  part_cmd->add_option("--out", pa.out, "Output region report JSON")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy against an oracle");
  auto* policy = eval_cmd->add_option_group("policy");
  policy->add_option("--model", ev.model, "Model JSON");
  policy->add_option("--tree", ev.tree, "Tree JSON");
  policy->add_option("--rc-train", ev.rc_train, "Fit the regress-and-compare baseline on this CSV");
  policy->require_option(1);
  eval_cmd->add_option("--test", ev.test, "Test feature CSV")->required();
  eval_cmd->add_option("--oracle", ev.oracle, "Oracle CSV")->required();
  eval_cmd->add_option("--report", ev.report, "Output report JSON");

  VerifyArgs ve;
  auto* verify_cmd = app.add_subcommand("verify", "Check that a tree reproduces a model");
  verify_cmd->add_option("--model", ve.model, "Model JSON")->required();
  verify_cmd->add_option("--tree", ve.tree, "Tree JSON")->required();
  verify_cmd->add_option("--points", ve.points, "Number of uniform points")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--seed", ve.seed, "Random seed");
  verify_cmd->add_option("--lo", ve.lo, "Lower corner of the sampling box");
  verify_cmd->add_option("--hi", ve.hi, "Upper corner of the sampling box");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out);
    if (*train_cmd) return cmd_train(tr, out, err);
    if (*extract_cmd) return cmd_extract(ex, out);
    if (*part_cmd) return cmd_partitions(pa, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*verify_cmd) return cmd_verify(ve, out);
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace prelu::cli
