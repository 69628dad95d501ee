#pragma once

#include <filesystem>

#include "noisygate/cat_study.hpp"
#include "noisygate/format.hpp"

namespace noisygate::testing {

inline std::filesystem::path data_dir() { return NOISYGATE_TEST_DATA_DIR; }

inline AssessmentModel cat_model() {
  return cat::build_model(cat::parse_elicitation(read_file(data_dir() / "cat_elicitation.csv")));
}

inline AnswerLog cat_answers() { return load_answers_file(data_dir() / "cat_answers.csv"); }

}  // namespace noisygate::testing
