#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

namespace {

std::filesystem::path env_or(const char* name, const std::filesystem::path& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::filesystem::path(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace noisygate::cli;

  spdlog::set_default_logger(spdlog::stderr_color_mt("noisygate"));
  spdlog::set_level(spdlog::level::warn);

  const std::filesystem::path default_data = env_or("NOISYGATE_DATA_DIR", NOISYGATE_DEFAULT_DATA_DIR);

  CLI::App app{"noisygate: noisy-gate Bayesian skill assessment"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NOISYGATE_VERSION);

  std::filesystem::path validate_model;
  auto* validate = app.add_subcommand("validate", "Check a model document");
  validate->add_option("model", validate_model, "Model document (JSON)")->required();

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "Score an answer log against a model");
  infer->add_option("model", infer_args.model, "Model document (JSON)")->required();
  infer->add_option("answers", infer_args.answers, "Answer log (CSV)")->required();
  infer->add_option("--student", infer_args.student, "Score one student only");
  infer->add_flag("--oracle", infer_args.oracle,
                  "Cross-check against full-joint enumeration (fails above 1e-10)");
  infer->add_flag("--show-excluded", infer_args.show_excluded,
                  "List answer cells that could not be used");
  infer->add_option("--decimals", infer_args.decimals, "Decimals in the result table")
      ->check(CLI::Range(0, 17));

  CatReportArgs cat_args;
  cat_args.data_dir = default_data;
  auto* cat_report = app.add_subcommand("cat-report", "Score the bundled Cross Array Task data");
  cat_report->add_flag("--compare-paper", cat_args.compare_paper,
                       "Match students against the published posterior rows");
  cat_report->add_flag("--show-excluded", cat_args.show_excluded,
                       "List answer cells that could not be used");
  cat_report->add_option("--data-dir", cat_args.data_dir, "Directory with the CAT fixtures");
  cat_report->add_option("--decimals", cat_args.decimals, "Decimals in the result table")
      ->check(CLI::Range(0, 17));

  std::filesystem::path cat_data = default_data;
  std::optional<std::filesystem::path> cat_out;
  auto* cat_model = app.add_subcommand("cat-model", "Emit the CAT model document");
  cat_model->add_option("--data-dir", cat_data, "Directory with the CAT fixtures");
  cat_model->add_option("-o,--out", cat_out, "Output file (default: stdout)");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Time closed-form, engine and enumeration paths");
  bench->add_option("--skills", bench_args.skills, "Largest skill count")->check(CLI::Range(1, 64));
  bench->add_option("--gates", bench_args.gates, "Gates in the engine model");
  bench->add_option("--seed", bench_args.seed, "Random seed");
  bench->add_option("--repeats", bench_args.repeats, "Timing repetitions (best of)");

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "Write a random model and answer log");
  sample->add_option("--skills", sample_args.skills, "Skill count")->check(CLI::Range(1, 20));
  sample->add_option("--gates", sample_args.gates, "Gate count");
  sample->add_option("--students", sample_args.students, "Students in the answer log");
  sample->add_option("--seed", sample_args.seed, "Random seed");
  sample->add_option("--model-out", sample_args.model_out, "Model output file")->required();
  sample->add_option("--answers-out", sample_args.answers_out, "Answer log output file");

  ServeArgs serve_args;
  serve_args.addr = std::getenv("NOISYGATE_ADDR") ? std::getenv("NOISYGATE_ADDR") : serve_args.addr;
  serve_args.models_dir = env_or("NOISYGATE_MODELS_DIR", default_data);
  serve_args.data_dir = env_or("NOISYGATE_STATE_DIR", "noisygate-data");
  if (const char* level = std::getenv("NOISYGATE_LOG_LEVEL")) serve_args.log_level = level;
  auto* serve = app.add_subcommand("serve", "Run the session service");
  serve->add_option("--addr", serve_args.addr, "Listen address host:port");
  serve->add_option("--models-dir", serve_args.models_dir, "Directory of model documents");
  serve->add_option("--data-dir", serve_args.data_dir, "Directory for the session store");
  serve->add_option("--log-level", serve_args.log_level, "trace|debug|info|warn|error|off");
  serve->add_option("--static-dir", serve_args.static_dir, "Static files served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*validate) return run_validate(validate_model, std::cout, std::cerr);
  if (*infer) return run_infer(infer_args, std::cout, std::cerr);
  if (*cat_report) return run_cat_report(cat_args, std::cout, std::cerr);
  if (*cat_model) return run_cat_model(cat_data, cat_out, std::cout, std::cerr);
  if (*bench) return run_bench(bench_args, std::cout, std::cerr);
  if (*sample) return run_sample(sample_args, std::cout, std::cerr);
  if (*serve) return run_serve(serve_args, std::cerr);
  return kUsage;
}
