#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace noisygate::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kIo = 3,
};

struct InferArgs {
  std::filesystem::path model;
  std::filesystem::path answers;
  std::optional<std::string> student;
  bool oracle = false;
  bool show_excluded = false;
  int decimals = 2;
};

struct CatReportArgs {
  std::filesystem::path data_dir;
  bool compare_paper = false;
  bool show_excluded = false;
  int decimals = 2;
};

struct BenchArgs {
  std::size_t skills = 20;
  std::size_t gates = 10;
  std::uint64_t seed = 1;
  int repeats = 5;
};

struct SampleArgs {
  std::size_t skills = 6;
  std::size_t gates = 8;
  std::size_t students = 5;
  std::uint64_t seed = 1;
  std::filesystem::path model_out;
  std::optional<std::filesystem::path> answers_out;
};

struct ServeArgs {
  std::string addr = "127.0.0.1:8080";
  std::filesystem::path models_dir;
  std::filesystem::path data_dir;
  std::string log_level = "info";
  std::optional<std::filesystem::path> static_dir;
};

int run_validate(const std::filesystem::path& model, std::ostream& out, std::ostream& err);
int run_infer(const InferArgs& args, std::ostream& out, std::ostream& err);
int run_cat_report(const CatReportArgs& args, std::ostream& out, std::ostream& err);
int run_cat_model(const std::filesystem::path& data_dir,
                  const std::optional<std::filesystem::path>& out_path, std::ostream& out,
                  std::ostream& err);
int run_bench(const BenchArgs& args, std::ostream& out, std::ostream& err);
int run_sample(const SampleArgs& args, std::ostream& out, std::ostream& err);
int run_serve(const ServeArgs& args, std::ostream& err);

}  // namespace noisygate::cli
