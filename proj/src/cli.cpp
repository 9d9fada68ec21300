#include "seqlabel/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <thread>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "seqlabel/estimator.hpp"
#include "seqlabel/io.hpp"
#include "seqlabel/sgd.hpp"
#include "seqlabel/synth.hpp"

namespace seqlabel {

namespace {

void setup_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_logger_st("seqlabel");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::level::level_enum level = spdlog::level::err;
  if (const char* env = std::getenv("SEQLABEL_LOG")) level = spdlog::level::from_str(env);
  spdlog::set_level(level);
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

int resolve_resolution(const std::string& r, const ModelSpec& model) {
  const int levels = model.layout().resolution_count();
  if (r == "element") return 0;
  if (r == "sequence") return levels - 1;
  int level = 0;
  try {
    std::size_t used = 0;
    level = std::stoi(r, &used);
    if (used != r.size()) throw std::invalid_argument(r);
  } catch (const std::exception&) {
    throw ParseError("--resolution must be element, sequence or a level in 1.." + std::to_string(levels));
  }
  if (level < 1 || level > levels) throw InvalidSpec("resolution " + r + " outside 1.." + std::to_string(levels));
  return level - 1;
}

void require(const std::string& value, const char* flag, const std::string& command) {
  if (value.empty()) throw ParseError(command + " needs " + flag);
}

void log_warnings(const Diagnostics& d) {
  for (const auto& w : d.warnings) spdlog::warn("{}: {}", w.kind, w.detail);
}

std::vector<std::uint64_t> seed_list(const RunConfig& c) {
  if (c.seeds < 1) throw InvalidSpec("--seeds must be positive");
  std::vector<std::uint64_t> s(c.seeds);
  std::iota(s.begin(), s.end(), c.seed);
  return s;
}

int do_check(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(c.model, "--model", "check");
  const auto loaded = load_model(c.model);
  log_warnings(loaded.diagnostics);
  const auto report = validate_model(loaded.model);
  out << report.summary();
  if (report.ok) return 0;
  err << "E_VALIDATE: AssumptionViolation: " << report.issues.front().assumption << ": " << report.issues.front().detail;
  if (report.issues.size() > 1) err << " (" << report.issues.size() - 1 << " further issues)";
  err << '\n';
  return 1;
}

int do_fit(const RunConfig& c, std::ostream& out) {
  require(c.model, "--model", "fit");
  require(c.votes, "--votes", "fit");
  require(c.out, "--out", "fit");
  const int threads = resolve_threads(c.threads);
  const auto loaded = load_model(c.model);
  log_warnings(loaded.diagnostics);
  const auto votes = read_votes(c.votes, loaded.model);
  LabelModelParams params;
  if (c.method == "closed_form") {
    params = fit_closed_form(loaded.model, votes, threads);
  } else if (c.method == "sgd") {
    SgdOptions opts;
    if (c.lr) opts.lr = *c.lr;
    if (c.epochs) opts.epochs = *c.epochs;
    if (c.batch) opts.batch = *c.batch;
    opts.seed = c.seed;
    spdlog::info("sgd lr={} epochs={} batch={} seed={}", opts.lr, opts.epochs, opts.batch, opts.seed);
    auto result = fit_sgd(loaded.model, votes, opts, threads);
    if (!c.loss_curve.empty()) write_loss_curve(c.loss_curve, result.loss_curve);
    params = std::move(result.params);
  } else {
    throw ParseError("--method must be closed_form or sgd");
  }
  log_warnings(params.diagnostics.warnings);
  save_params(c.out, loaded.model, params);
  out << "fit " << params.diagnostics.method << ": " << params.mu.size() << " accuracy tables, " << params.phi.size()
      << " correlation slices, " << params.joint.size() << " joint tables, " << params.diagnostics.warnings.warnings.size()
      << " warnings\n";
  return 0;
}

int do_predict(const RunConfig& c, std::ostream& out) {
  require(c.model, "--model", "predict");
  require(c.votes, "--votes", "predict");
  require(c.params, "--params", "predict");
  require(c.out, "--out", "predict");
  const auto loaded = load_model(c.model);
  const auto votes = read_votes(c.votes, loaded.model);
  const auto params = load_params(c.params, loaded.model);
  const int level = resolve_resolution(c.resolution, loaded.model);
  Diagnostics diag;
  const auto labels = emit_labels(loaded.model, params, votes, level, resolve_threads(c.threads), &diag);
  log_warnings(diag);
  write_labels(c.out, labels);
  out << "predict: " << labels.sequences << " sequences x " << labels.tasks.size() << " tasks\n";
  return 0;
}

int do_eval(const RunConfig& c, std::ostream& out) {
  require(c.gold, "--gold", "eval");
  const auto gold = read_labels(c.gold);
  LabelTable predicted;
  if (c.baseline == "majority") {
    require(c.model, "--model", "eval --baseline majority");
    require(c.votes, "--votes", "eval --baseline majority");
    const auto loaded = load_model(c.model);
    const auto votes = read_votes(c.votes, loaded.model);
    const auto mv = majority_vote(loaded.model, votes, resolve_resolution(c.resolution, loaded.model));
    spdlog::info("majority vote: {} ties, {} elements without votes", mv.ties, mv.abstained);
    predicted = mv.labels;
  } else if (c.baseline.empty()) {
    require(c.labels, "--labels", "eval");
    predicted = read_labels(c.labels);
  } else {
    throw ParseError("--baseline must be majority");
  }
  const auto metrics = evaluate(predicted, gold, c.threshold);
  if (metrics.degenerate_gold) spdlog::warn("DegenerateGold: gold labels contain a single class");
  const std::string text = metrics_to_json(metrics).dump(2) + "\n";
  if (c.out.empty()) {
    out << text;
  } else {
    std::ofstream f(c.out);
    if (!f) throw ParseError("cannot write " + c.out);
    f << text;
  }
  return 0;
}

int do_simulate(const RunConfig& c, std::ostream& out) {
  require(c.model, "--model", "simulate");
  require(c.out, "--out", "simulate");
  const int threads = resolve_threads(c.threads);
  const auto loaded = load_model(c.model);
  if (!loaded.truth) throw InvalidSpec("simulate needs a model file with a truth section");
  const auto& model = loaded.model;
  const auto& truth = *loaded.truth;
  if (c.experiment == "data") {
    if (c.n < 1) throw InvalidSpec("--n must be positive");
    const auto data = generate({&model, &truth, c.n, c.seed}, threads);
    write_votes(c.out, model, data.votes);
    if (!c.gold.empty()) write_labels(c.gold, gold_labels(model, data.latent, resolve_resolution(c.resolution, model)));
    out << "simulate: " << c.n << " sequences\n";
  } else if (c.experiment == "scaling") {
    const auto seeds = seed_list(c);
    auto tied = scaling_experiment(model, truth, c.n_grid, seeds, true, threads);
    const auto untied = scaling_experiment(model, truth, c.n_grid, seeds, false, threads);
    auto rows = tied.rows;
    rows.insert(rows.end(), untied.rows.begin(), untied.rows.end());
    write_scaling_csv(c.out, rows);
    for (std::size_t g = 0; g < c.n_grid.size(); ++g)
      out << "n=" << c.n_grid[g] << " tied=" << format_double(tied.mean_error[g])
          << " untied=" << format_double(untied.mean_error[g]) << '\n';
    auto slope = [](const ScalingSummary& s) { return s.slope ? format_double(*s.slope) : std::string("null"); };
    out << "slope tied=" << slope(tied) << " untied=" << slope(untied) << '\n';
  } else if (c.experiment == "sequential") {
    const auto rows = sequential_benefit_experiment(model, truth, c.n, seed_list(c), threads);
    write_benefit_csv(c.out, rows);
    double m = 0, i = 0, v = 0;
    for (const auto& r : rows) {
      m += r.modeled;
      i += r.ignored;
      v += r.majority;
    }
    const double k = static_cast<double>(rows.size());
    out << "mean f1 modeled=" << format_double(m / k) << " ignored=" << format_double(i / k)
        << " majority=" << format_double(v / k) << '\n';
  } else {
    throw ParseError("--experiment must be data, scaling or sequential");
  }
  return 0;
}

}  // namespace

int run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  setup_logging();
  spdlog::info("command={} model={} votes={} params={} out={} method={} resolution={} seed={} threads={}", c.command,
               c.model, c.votes, c.params, c.out, c.method, c.resolution, c.seed, resolve_threads(c.threads));
  try {
    if (c.command == "check") return do_check(c, out, err);
    if (c.command == "fit") return do_fit(c, out);
    if (c.command == "predict") return do_predict(c, out);
    if (c.command == "eval") return do_eval(c, out);
    if (c.command == "simulate") return do_simulate(c, out);
    throw ParseError("unknown command \"" + c.command + "\"");
  } catch (const Error& e) {
    err << error_code_name(e.code()) << ": " << e.what() << '\n';
  } catch (const nlohmann::json::exception& e) {
    err << "E_PARSE: ParseError: " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    err << "E_PARSE: ParseError: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "E_NUMERIC: InternalError: " << e.what() << '\n';
  }
  return 1;
}

int cli_main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Multi-resolution weak-supervision label model"};
  app.require_subcommand(1, 1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", c.model, "model JSON");
    sub->add_option("--out", c.out, "output path");
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--threads", c.threads, "worker threads (default: available cores)");
    sub->add_option("--resolution", c.resolution, "element, sequence or a 1-based level");
  };
  auto* check = app.add_subcommand("check", "validate a model against the estimator assumptions");
  common(check);
  auto* fit = app.add_subcommand("fit", "estimate the label model parameters");
  common(fit);
  fit->add_option("--votes", c.votes, "votes CSV");
  fit->add_option("--method", c.method, "closed_form or sgd");
  fit->add_option("--lr", c.lr, "SGD learning rate");
  fit->add_option("--epochs", c.epochs, "SGD epochs");
  fit->add_option("--batch", c.batch, "SGD batch size (0 = full batch)");
  fit->add_option("--loss-curve", c.loss_curve, "SGD loss curve CSV");
  auto* predict = app.add_subcommand("predict", "posterior label probabilities");
  common(predict);
  predict->add_option("--votes", c.votes, "votes CSV");
  predict->add_option("--params", c.params, "params JSON");
  auto* eval = app.add_subcommand("eval", "precision, recall and F1 against gold labels");
  common(eval);
  eval->add_option("--labels", c.labels, "predicted labels CSV");
  eval->add_option("--gold", c.gold, "gold labels CSV");
  eval->add_option("--threshold", c.threshold, "decision threshold");
  eval->add_option("--baseline", c.baseline, "majority: evaluate majority vote instead of --labels");
  eval->add_option("--votes", c.votes, "votes CSV for --baseline");
  auto* simulate = app.add_subcommand("simulate", "synthetic data and experiments");
  common(simulate);
  simulate->add_option("--experiment", c.experiment, "data, scaling or sequential");
  simulate->add_option("--n", c.n, "sequences per dataset");
  simulate->add_option("--seeds", c.seeds, "number of seeds, counted up from --seed");
  simulate->add_option("--n-grid", c.n_grid, "sample sizes of the scaling experiment")->delimiter(',');
  simulate->add_option("--gold", c.gold, "gold labels CSV written alongside the data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "E_PARSE: ParseError: " << e.what() << '\n';
    return 1;
  }
  for (auto* sub : app.get_subcommands()) c.command = sub->get_name();
  return run(c, std::cout, std::cerr);
}

}  // namespace seqlabel
