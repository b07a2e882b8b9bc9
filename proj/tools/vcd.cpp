// vcd: generate, train, eval, score and serve from the command line.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vcd/camera_sim.hpp"
#include "vcd/error.hpp"
#include "vcd/eval.hpp"
#include "vcd/features.hpp"
#include "vcd/pipeline.hpp"
#include "vcd/service.hpp"
#include "vcd/session.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 2,
  kConfig = 3,
  kData = 4,
  kModel = 5,
  kIo = 6,
  kInternal = 70,
};

vcd::gbdt::EnsembleModel load_model(const std::string& path) {
  try {
    return vcd::gbdt::load_model_file(path);
  } catch (const vcd::VersionError& e) {
    throw vcd::ModelError(e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw vcd::IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_targets(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(v > 0.0 && v <= 1.0)) {
      throw vcd::ConfigError("bad APCER target '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw vcd::ConfigError("no APCER targets given");
  return out;
}

struct GenerateArgs {
  std::string spec, out;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  bool seed_given = false;
};

int cmd_generate(const GenerateArgs& a) {
  auto spec = a.spec.empty() ? vcd::reference_population(a.seed) : vcd::load_population_file(a.spec);
  if (!a.spec.empty() && a.seed_given) spec.seed = a.seed;
  const auto records = vcd::generate_dataset(spec, a.n);
  vcd::write_dataset_file(a.out, records);
  std::size_t attacks = 0;
  for (const auto& r : records) attacks += r.label && vcd::coarsen(*r.label) == vcd::BinaryLabel::Attack;
  std::cerr << "wrote " << records.size() << " sessions (" << attacks << " attacks) to " << a.out
            << "\n";
  return kOk;
}

struct TrainArgs {
  std::string data, config, out;
};

int cmd_train(const TrainArgs& a) {
  const auto config = a.config.empty() ? vcd::PipelineConfig{} : vcd::load_pipeline_config_file(a.config);
  const auto records = vcd::read_dataset_file(a.data);
  const auto model = vcd::train_pipeline(records, config);
  vcd::gbdt::save_model_file(model, a.out);
  std::cerr << "model " << model.model_version << " written to " << a.out << "\n";
  for (std::size_t i = 0; i < model.forests.size(); ++i) {
    const auto& f = model.forests[i];
    std::cerr << "  member " << i << ": " << f.trees.size() << " trees, valid logloss "
              << f.history.valid_loss[static_cast<std::size_t>(f.history.best_iteration)] << "\n";
  }
  return kOk;
}

struct EvalArgs {
  std::string model, data, targets = "1e-1,1e-2,1e-3", report, det_csv;
};

int cmd_eval(const EvalArgs& a) {
  const auto targets = parse_targets(a.targets);
  const auto model = load_model(a.model);
  const auto records = vcd::read_dataset_file(a.data);
  const auto report = vcd::evaluate_pipeline(model, records, targets);
  if (!a.report.empty()) vcd::write_report_file(report, a.report);
  if (!a.det_csv.empty()) {
    std::ofstream out(a.det_csv, std::ios::binary);
    if (!out) throw vcd::IoError("cannot open '" + a.det_csv + "' for writing");
    vcd::write_det_csv(out, report.det);
  }
  std::printf("test sessions %zu (%zu attacks)  AUC %.4f\n", report.split.test,
              report.split.test_attacks, report.auc);
  std::printf("%-12s %10s %8s %8s %8s\n", "operating", "threshold", "APCER", "BPCER", "ACER");
  for (const auto& op : report.operating_points) {
    std::printf("%-12s %10.6g %7.2f%% %7.2f%% %7.2f%%%s\n", op.name.c_str(), op.threshold,
                100 * op.apcer, 100 * op.bpcer, 100 * op.acer,
                op.low_support ? "  (few validation attacks)" : "");
  }
  return kOk;
}

struct ServeArgs {
  std::string model, report, operating_point = "apcer_0.1", listen;
  double threshold = 0.0;
  bool has_threshold = false;
  std::size_t max_body = 64 * 1024;
  bool quiet = false;
};

vcd::ServiceConfig service_config(const ServeArgs& a) {
  vcd::ServiceConfig c;
  c.model_path = a.model;
  c.report_path = a.report;
  c.operating_point = a.operating_point;
  if (a.has_threshold) c.threshold = a.threshold;
  if (!a.listen.empty()) c.listen = a.listen;
  c.max_body_bytes = a.max_body;
  c.log_requests = !a.quiet;
  vcd::apply_env_overrides(c);
  return c;
}

struct ScoreArgs {
  ServeArgs service;
  std::string session;
};

int cmd_score(ScoreArgs a) {
  if (a.service.report.empty() && !a.service.has_threshold) {
    a.service.threshold = 0.5;
    a.service.has_threshold = true;
  }
  const auto config = service_config(a.service);
  std::unique_ptr<vcd::ScoringService> service;
  try {
    service = vcd::ScoringService::from_config(config);
  } catch (const vcd::VersionError& e) {
    throw vcd::ModelError(e.what());
  }
  const auto record = vcd::parse_session(read_file(a.session));
  std::cout << vcd::score_response_to_json(service->decide(record)) << "\n";
  return kOk;
}

vcd::HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const ServeArgs& a) {
  const auto config = service_config(a);
  std::unique_ptr<vcd::ScoringService> service;
  try {
    service = vcd::ScoringService::from_config(config);
  } catch (const vcd::VersionError& e) {
    throw vcd::ModelError(e.what());
  }
  const auto [host, port] = vcd::parse_listen_address(config.listen);
  vcd::HttpServer server(*service, config.log_requests ? &std::cerr : nullptr);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run(host, port);
  g_server = nullptr;
  return kOk;
}

struct FeaturesArgs {
  std::string data, out, plan;
};

int cmd_features(const FeaturesArgs& a) {
  const auto plan = a.plan.empty() ? vcd::ChallengePlan{} : vcd::load_plan_file(a.plan);
  const auto layout = vcd::FeatureLayout::for_plan(plan);
  const auto records = vcd::read_dataset_file(a.data);
  const auto matrix = vcd::extract_matrix(records, layout);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw vcd::IoError("cannot open '" + a.out + "' for writing");
  vcd::write_feature_csv(out, matrix, layout, vcd::binary_labels(records));
  return kOk;
}

void add_service_flags(CLI::App* cmd, ServeArgs& a) {
  cmd->add_option("--model", a.model, "Model file (env VCD_MODEL overrides)");
  cmd->add_option("--report", a.report, "Eval report holding the operating points");
  cmd->add_option("--operating-point", a.operating_point, "Operating point name, e.g. apcer_0.1");
  cmd->add_option_function<double>(
      "--threshold", [&a](double t) { a.threshold = t; a.has_threshold = true; },
      "Explicit score threshold instead of a named operating point");
  cmd->add_option("--max-body", a.max_body, "Request size limit in bytes");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual camera detection toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Simulate a labeled session dataset (NDJSON)");
  generate->add_option("--spec", gen.spec, "Population spec JSON (default: reference population)");
  generate->add_option("--n", gen.n, "Number of sessions")->required()->check(CLI::PositiveNumber);
  generate->add_option("--seed", gen.seed, "Random seed");
  generate->add_option("--out", gen.out, "Output NDJSON file")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Split, extract features and train the ensemble");
  train->add_option("--data", tr.data, "Labeled NDJSON dataset")->required();
  train->add_option("--config", tr.config, "Pipeline config JSON (default settings when omitted)");
  train->add_option("--out", tr.out, "Model output file")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on its held-out test split");
  eval->add_option("--model", ev.model, "Model file")->required();
  eval->add_option("--data", ev.data, "The labeled dataset the model was trained from")->required();
  eval->add_option("--targets", ev.targets, "Comma separated APCER targets");
  eval->add_option("--report", ev.report, "Report JSON output");
  eval->add_option("--det-csv", ev.det_csv, "DET curve CSV output");

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Score one session JSON file");
  add_service_flags(score, sc.service);
  score->add_option("--session", sc.session, "Session JSON file")->required();

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "HTTP scoring service");
  add_service_flags(serve, sv);
  serve->add_option("--listen", sv.listen, "host:port (env VCD_LISTEN overrides)");
  serve->add_flag("--quiet", sv.quiet, "No request logs");

  FeaturesArgs fe;
  auto* features = app.add_subcommand("features", "Export the feature matrix as CSV");
  features->add_option("--data", fe.data, "NDJSON dataset")->required();
  features->add_option("--plan", fe.plan, "Challenge plan JSON");
  features->add_option("--out", fe.out, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  gen.seed_given = generate->count("--seed") > 0;
  try {
    if (*generate) return cmd_generate(gen);
    if (*train) return cmd_train(tr);
    if (*eval) return cmd_eval(ev);
    if (*score) return cmd_score(sc);
    if (*serve) return cmd_serve(sv);
    if (*features) return cmd_features(fe);
  } catch (const vcd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const vcd::ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kModel;
  } catch (const vcd::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const vcd::Error& e) {
    // Parse, validation, version, metric and training errors all stem from
    // the input data.
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
