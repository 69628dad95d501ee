#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <pthread.h>
#include <spdlog/spdlog.h>

#include "noisygate/cat_study.hpp"
#include "noisygate/errors.hpp"
#include "noisygate/format.hpp"
#include "noisygate/gates.hpp"
#include "noisygate/http_server.hpp"
#include "noisygate/inference.hpp"
#include "noisygate/random_model.hpp"
#include "noisygate/service.hpp"

namespace noisygate::cli {

namespace {

constexpr double kOracleTolerance = 1e-10;

void print_exclusions(const std::string& student, const std::vector<ExcludedCell>& excluded,
                      std::ostream& err) {
  for (const auto& e : excluded) {
    err << "excluded: student " << student << " Q" << e.question_id;
    if (!e.sub_question_id.empty()) err << "/" << e.sub_question_id;
    err << ": " << e.reason << "\n";
  }
}

std::string scientific(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

template <typename F>
double time_us(int repeats, F&& f) {
  using clock = std::chrono::steady_clock;
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock::now();
    f();
    const auto t1 = clock::now();
    best = std::min(best, std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  return best;
}

std::string cell(double us) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << us;
  return s.str();
}

}  // namespace

int run_validate(const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  try {
    const auto model = parse_model(text);
    out << "ok: " << model.skills.size() << " skills, " << model.gates.size() << " gates\n";
    return kOk;
  } catch (const ParseError& e) {
    out << "invalid: " << e.what() << "\n";
    return kFailure;
  }
}

int run_infer(const InferArgs& args, std::ostream& out, std::ostream& err) {
  AssessmentModel model;
  AnswerLog log;
  try {
    const std::string model_text = read_file(args.model);
    const std::string answers_text = read_file(args.answers);
    model = parse_model(model_text);
    log = parse_answers(answers_text);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }

  std::vector<std::string> students = log.student_ids;
  if (args.student) {
    if (!log.student_column(*args.student)) {
      err << "error: unknown student '" << *args.student << "'\n";
      return kUsage;
    }
    students = {*args.student};
  }

  ResultTable table;
  for (const auto& s : model.skills) table.skill_ids.push_back(s.id);
  int status = kOk;
  double worst = 0.0;
  for (const auto& id : students) {
    auto input = answers_to_evidence(model, log, id);
    if (args.show_excluded) print_exclusions(id, input.excluded, err);
    try {
      auto posteriors = infer_posteriors(model, input.evidence);
      if (args.oracle) {
        auto reference = brute_force_posteriors(model, input.evidence);
        for (std::size_t i = 0; i < posteriors.size(); ++i) {
          worst = std::max(worst,
                           std::fabs(posteriors[i].posterior_true - reference[i].posterior_true));
        }
      }
      table.rows.push_back(make_result_row(id, posteriors));
    } catch (const Error& e) {
      err << "error: student " << id << ": " << e.what() << "\n";
      table.rows.push_back({id, {}});
      status = kFailure;
    }
  }
  out << serialize_results(table, args.decimals);

  if (args.oracle) {
    if (worst <= kOracleTolerance) {
      err << "oracle agreement: max |Δ| < 1e-10 (" << scientific(worst) << ")\n";
    } else {
      err << "oracle divergence: max |Δ| = " << scientific(worst) << " > 1e-10\n";
      status = kFailure;
    }
  }
  return status;
}

int run_cat_model(const std::filesystem::path& data_dir,
                  const std::optional<std::filesystem::path>& out_path, std::ostream& out,
                  std::ostream& err) {
  try {
    const auto table = cat::parse_elicitation(read_file(data_dir / "cat_elicitation.csv"));
    const std::string doc = serialize_model(cat::build_model(table));
    if (out_path) {
      write_file(*out_path, doc);
    } else {
      out << doc;
    }
    return kOk;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

int run_cat_report(const CatReportArgs& args, std::ostream& out, std::ostream& err) {
  AssessmentModel model;
  AnswerLog log;
  try {
    model = cat::build_model(cat::parse_elicitation(read_file(args.data_dir / "cat_elicitation.csv")));
    log = parse_answers(read_file(args.data_dir / "cat_answers.csv"));
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }

  const auto scores = cat::score_all_students(model, log);
  out << serialize_results(scores.table(), args.decimals);

  int status = kOk;
  for (const auto& s : scores.students) {
    if (args.show_excluded) print_exclusions(s.student_id, s.excluded, err);
    if (s.error) {
      err << "error: student " << s.student_id << ": " << *s.error << "\n";
      status = kFailure;
    }
  }

  if (args.compare_paper) {
    const auto cmp = cat::compare_with_reference(scores);
    out << "\n";
    for (const auto& m : cmp.matches) {
      out << "pupil " << (m.reference + 1) << ": ";
      if (m.student) {
        out << "matched student " << scores.students[*m.student].student_id;
      } else {
        out << "no match";
      }
      if (m.closest) {
        out << " (closest student " << scores.students[*m.closest].student_id
            << ", max |Δ| = " << format_probability(m.closest_deviation, 3) << ")";
      }
      out << "\n";
    }
    out << cat::summary_line(cmp) << "\n";
    if (cmp.matched < cmp.matches.size()) status = kFailure;
  }
  return status;
}

int run_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  if (args.skills == 0 || args.repeats <= 0) {
    err << "error: --skills and --repeats must be positive\n";
    return kUsage;
  }
  std::set<std::size_t> sizes;
  for (std::size_t n : {2, 4, 8, 12, 16, 20, 24}) {
    if (n <= args.skills) sizes.insert(n);
  }
  sizes.insert(args.skills);

  std::mt19937_64 rng(args.seed);
  out << "skills,gates,closed_form_us,engine_us,explicit_us,oracle_us\n";
  for (std::size_t n : sizes) {
    // Single leaky AND gate over every skill, observed wrong.
    AssessmentModel single;
    for (std::size_t i = 0; i < n; ++i) {
      single.skills.push_back({"s" + std::to_string(i), "", 0.5});
    }
    single.gates.push_back(random_gate(rng, n, GateKind::And, true));
    const NoisyGate& gate = single.gates.front();
    std::vector<double> pis(n, 0.5);

    const double closed = time_us(args.repeats, [&] {
      volatile double sink = answer_marginal(gate, pis);
      for (std::size_t k = 0; k < n; ++k) sink = posterior_given_non_distinguished(gate, pis, k);
      (void)sink;
    });

    RandomModelOptions options;
    options.min_skills = options.max_skills = n;
    options.min_gates = options.max_gates = args.gates;
    options.max_inputs = 4;
    const auto model = random_model(rng, options);
    const auto evidence = sample_evidence(rng, model, 1.0);
    std::string engine;
    try {
      engine = cell(time_us(args.repeats, [&] { infer_posteriors(model, evidence); }));
    } catch (const CapacityError& e) {
      engine = "refused (cap " + std::to_string(e.cap()) + ")";
    } catch (const Error&) {
      engine = "inconsistent";
    }

    std::string explicit_cell;
    try {
      const auto network = construct_explicit_network(gate);
      ParentAssignment assignment;
      for (const auto& s : single.skills) assignment[s.id] = false;
      explicit_cell = cell(time_us(args.repeats, [&] {
        volatile double sink = marginalize_explicit(network, assignment);
        (void)sink;
      }));
    } catch (const CapacityError& e) {
      explicit_cell = "refused (cap " + std::to_string(e.cap()) + ")";
    }

    std::string oracle;
    try {
      const EvidenceSet wrong{{gate.id, Outcome::NonDistinguished}};
      oracle = cell(time_us(1, [&] { brute_force_posteriors(single, wrong); }));
    } catch (const CapacityError& e) {
      oracle = "refused (cap " + std::to_string(e.cap()) + ")";
    }

    out << n << "," << args.gates << "," << cell(closed) << "," << engine << "," << explicit_cell
        << "," << oracle << "\n";
  }
  return kOk;
}

int run_sample(const SampleArgs& args, std::ostream& out, std::ostream& err) {
  std::mt19937_64 rng(args.seed);
  RandomModelOptions options;
  options.min_skills = options.max_skills = std::max<std::size_t>(1, args.skills);
  options.min_gates = options.max_gates = args.gates;
  const auto model = random_model(rng, options);

  AnswerLog log;
  for (std::size_t s = 0; s < args.students; ++s) log.student_ids.push_back(std::to_string(s + 1));
  for (const auto& gate : model.gates) {
    log.rows.push_back({gate.id, "", std::vector<AnswerCell>(args.students, AnswerCell::Blank)});
  }
  for (std::size_t s = 0; s < args.students; ++s) {
    const auto evidence = sample_evidence(rng, model, 0.7);
    for (std::size_t g = 0; g < model.gates.size(); ++g) {
      auto it = evidence.find(model.gates[g].id);
      if (it == evidence.end()) continue;
      log.rows[g].cells[s] =
          answer_is_correct(model.gates[g].kind, it->second) ? AnswerCell::Yes : AnswerCell::No;
    }
  }

  try {
    write_file(args.model_out, serialize_model(model));
    if (args.answers_out) write_file(*args.answers_out, serialize_answers(log));
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  out << "wrote " << args.model_out.string() << " (" << model.skills.size() << " skills, "
      << model.gates.size() << " gates)\n";
  return kOk;
}

int run_serve(const ServeArgs& args, std::ostream& err) {
  const auto level = spdlog::level::from_str(args.log_level);
  if (level == spdlog::level::off && args.log_level != "off") {
    err << "error: unknown log level '" << args.log_level << "'\n";
    return kUsage;
  }
  spdlog::set_level(level);

  service::HttpOptions http;
  const auto colon = args.addr.rfind(':');
  if (colon == std::string::npos) {
    err << "error: --addr must be host:port\n";
    return kUsage;
  }
  http.host = args.addr.substr(0, colon);
  try {
    http.port = std::stoi(args.addr.substr(colon + 1));
  } catch (const std::exception&) {
    err << "error: bad port in --addr '" << args.addr << "'\n";
    return kUsage;
  }
  http.static_dir = args.static_dir;

  // Block termination signals before any thread starts so that only the
  // waiting thread below receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    std::filesystem::create_directories(args.data_dir);
    service::ModelRegistry models(args.models_dir);
    service::SessionStore store(args.data_dir / "sessions.db");
    service::SessionService sessions(models, store);
    sessions.restore();
    service::HttpServer server(sessions, http);
    server.bind();

    std::thread waiter([&server, signals] {
      int received = 0;
      sigwait(&signals, &received);
      spdlog::info("signal {} received, shutting down", received);
      server.stop();
    });
    server.listen();
    if (waiter.joinable()) {
      pthread_kill(waiter.native_handle(), SIGTERM);
      waiter.join();
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace noisygate::cli
