#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qwalk/errors.hpp"
#include "qwalk/oracles.hpp"
#include "qwalk/runner/runner.hpp"

namespace {

using qwalk::ErrorKind;
using Json = nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse:
    case ErrorKind::Validation:
    case ErrorKind::Config:
    case ErrorKind::Degenerate:
    case ErrorKind::Unsupported: return 2;
    case ErrorKind::Contract:
    case ErrorKind::Integration: return 3;
    case ErrorKind::Size:
    case ErrorKind::Resource: return 4;
  }
  return 3;
}

class Params {
 public:
  explicit Params(const std::vector<std::string>& args) {
    for (const auto& a : args) {
      const auto eq = a.find('=');
      qwalk::require(eq != std::string::npos && eq > 0, ErrorKind::Config, "oracle parameter '" + a + "' is not key=value");
      values_[a.substr(0, eq)] = a.substr(eq + 1);
    }
  }

  double number(const std::string& key) const {
    const auto it = values_.find(key);
    qwalk::require(it != values_.end(), ErrorKind::Config, "oracle parameter '" + key + "' is required");
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    qwalk::fail(ErrorKind::Config, "oracle parameter '" + key + "' is not a number");
  }

  std::size_t count(const std::string& key) const {
    const double v = number(key);
    qwalk::require(v >= 0 && v == static_cast<double>(static_cast<std::size_t>(v)), ErrorKind::Config,
                   "oracle parameter '" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }

 private:
  std::map<std::string, std::string> values_;
};

template <typename T>
Json regime(const qwalk::oracles::Oracle<T>& o) {
  return {{"regime", o.regime}, {"in_regime", o.in_regime}};
}

Json run_oracle(const std::string& name, const Params& p) {
  namespace o = qwalk::oracles;
  Json out = {{"oracle", name}};
  if (name == "hadamard_moments") {
    const auto r = o::hadamard_moments(p.count("T"));
    out.update(regime(r));
    out["mean"] = r.value.first;
    out["second_moment"] = r.value.second;
  } else if (name == "bessel_j") {
    out["value"] = o::bessel_j(static_cast<long>(p.number("order")), p.number("t"));
  } else if (name == "ctqw_line_amplitude") {
    const auto a = o::ctqw_line_amplitude(static_cast<long>(p.number("x")), p.number("t"));
    out["re"] = a.real();
    out["im"] = a.imag();
    out["probability"] = std::norm(a);
  } else if (name == "dephase_variance_rate") {
    const auto r = o::brun_dephase_variance_rate(p.number("theta"));
    out.update(regime(r));
    out["value"] = r.value;
  } else if (name == "line_sigma_bound") {
    const auto r = o::kendon_sigma_bound(p.number("T"), p.number("p"));
    out.update(regime(r));
    out["value"] = r.value;
    out["ideal"] = o::kendon_sigma_ideal(p.number("T"));
  } else if (name == "classical_sigma") {
    const auto r = o::classical_end_sigma(p.number("T"), p.number("q"));
    out.update(regime(r));
    out["value"] = r.value;
  } else if (name == "cycle_mixing_small_p") {
    const auto r = o::fedichkin_smallp_bound(p.count("N"), p.number("p"), p.number("epsilon"));
    out.update(regime(r));
    out["value"] = r.value;
  } else if (name == "cycle_mixing_large_p") {
    const auto r = o::fedichkin_largep_bounds(p.count("N"), p.number("p"), p.number("epsilon"));
    out.update(regime(r));
    out["lower"] = r.value.first;
    out["upper"] = r.value.second;
  } else if (name == "cycle_mixing_time_averaged") {
    const auto r = o::fedichkin_timeavg_bound(p.count("N"), p.number("p"), p.number("epsilon"));
    out.update(regime(r));
    out["value"] = r.value;
  } else if (name == "hypercube_probabilities") {
    const auto r = o::alagic_probs(p.count("n"), p.number("k"), p.number("p"), p.number("t"));
    out.update(regime(r));
    out["p0"] = r.value.first;
    out["p1"] = r.value.second;
  } else if (name == "hypercube_mixing_time") {
    out["value"] = o::alagic_mixing_times(p.count("n"), p.number("k"), p.number("p"), p.count("c"));
  } else if (name == "hypercube_hitting") {
    const auto [t, prob] = o::alagic_hitting(p.count("n"), p.number("k"), p.number("p"), p.count("c"));
    out["time"] = t;
    out["probability"] = prob;
  } else if (name == "search_peak_time") {
    out["value"] = o::search_peak_time(p.number("N"));
  } else if (name == "classical_binomial") {
    const auto steps = p.count("T");
    const auto b = o::classical_binomial(steps);
    out["x_min"] = -static_cast<long long>(steps);
    out["values"] = std::vector<double>(b.data(), b.data() + b.size());
  } else if (name == "classical_hypercube_first_arrival") {
    out["values"] = o::classical_hypercube_first_arrival(p.count("n"), p.count("T"));
  } else {
    qwalk::fail(ErrorKind::Config, "unknown oracle '" + name + "'");
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoherent quantum walk simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::string out_dir = ".";
  std::optional<double> horizon;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (default: QWALKDEC_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option("--horizon-override", horizon, "replace the configured horizon");
  };
  CLI::App* run = app.add_subcommand("run", "run one experiment (sweeps included)");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "run an experiment that declares a sweep block");
  add_common(sweep);
  CLI::App* check = app.add_subcommand("validate", "parse and validate a config without running it");
  check->add_option("config", config_path, "experiment config (JSON)")->required();
  check->add_option("--horizon-override", horizon, "replace the configured horizon");

  std::string oracle_name;
  std::vector<std::string> oracle_params;
  CLI::App* oracles = app.add_subcommand("oracles", "evaluate a closed-form reference value");
  oracles->add_option("name", oracle_name, "oracle name")->required();
  oracles->add_option("params", oracle_params, "key=value parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*oracles) {
      std::cout << run_oracle(oracle_name, Params(oracle_params)).dump(2) << '\n';
      return 0;
    }
    qwalk::runner::ExperimentConfig config = qwalk::runner::load_config(config_path);
    if (*check) {
      if (horizon) config.horizon = *horizon;
      qwalk::runner::validate(config);
      const auto tasks = qwalk::runner::expand(config, config.seed);
      std::cout << "ok: " << config.experiment_id << " (" << tasks.size() << " task" << (tasks.size() == 1 ? "" : "s")
                << ")\n";
      return 0;
    }
    if (*sweep)
      qwalk::require(!config.sweep.empty(), ErrorKind::Config, "sweep: the sweep command needs a sweep block");
    qwalk::runner::RunOptions options;
    options.seed = seed;
    options.threads = threads;
    options.out_dir = out_dir;
    options.horizon_override = horizon;
    const auto summary = qwalk::runner::execute(std::move(config), options);
    std::cout << summary.csv.string() << " (" << summary.rows << " rows, " << summary.tasks << " task"
              << (summary.tasks == 1 ? "" : "s") << (summary.all_converged ? "" : ", some observables unconverged")
              << ")\n";
    return 0;
  } catch (const qwalk::Error& e) {
    std::cerr << "qwalkdec: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "qwalkdec: out of memory\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "qwalkdec: " << e.what() << '\n';
    return 3;
  }
}
