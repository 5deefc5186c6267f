#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qwalk/errors.hpp"
#include "qwalk/rng.hpp"
#include "qwalk/types.hpp"

namespace qwalk {

enum class Channel {
  None,
  MeasurePosition,
  MeasureCoin,
  MeasureBoth,
  CoinDephase,    // two phase Kraus operators of strength theta on the coin
  BrokenLinks,    // rate = per-edge breaking probability
  ImperfectCoin,  // rate = spread parameter of the Gaussian coin angle
  MultiCoin,      // enlarged coin register; see multi_coin_evolve
};

inline const char* to_string(Channel c) {
  switch (c) {
    case Channel::None: return "none";
    case Channel::MeasurePosition: return "measure_position";
    case Channel::MeasureCoin: return "measure_coin";
    case Channel::MeasureBoth: return "measure_both";
    case Channel::CoinDephase: return "coin_dephase";
    case Channel::BrokenLinks: return "broken_links";
    case Channel::ImperfectCoin: return "imperfect_coin";
    case Channel::MultiCoin: return "multi_coin";
  }
  return "none";
}

inline bool is_projective(Channel c) {
  return c == Channel::MeasurePosition || c == Channel::MeasureCoin || c == Channel::MeasureBoth;
}

/// When decoherence events happen.
struct Schedule {
  enum class Type { PerStep, FixedInterval, RandomTimes };
  Type type = Type::PerStep;
  std::size_t interval = 1;  // FixedInterval: event at every multiple of this step count
  std::size_t count = 0;     // RandomTimes: number of events ...
  std::size_t horizon = 0;   // ... drawn without replacement from steps 1..horizon
  std::uint64_t seed = 0;
};

/// Basis of coin measurements. SigmaY projects onto (|0> +- i|1>)/sqrt(2).
enum class CoinBasis { Computational, SigmaY };

struct NoiseSpec {
  Channel channel = Channel::None;
  CoinBasis coin_basis = CoinBasis::Computational;
  double rate = 0.0;   // probability per step in [0, 1]
  double theta = 0.0;  // CoinDephase strength in [0, pi/4]
  std::size_t coin_count = 1;  // MultiCoin register size
  bool random_order = false;   // MultiCoin order
  Schedule schedule;

  void validate() const {
    require(rate >= 0.0 && rate <= 1.0, ErrorKind::Validation,
            "noise.rate must lie in [0, 1], got " + std::to_string(rate));
    require(theta >= 0.0 && theta <= kPi / 4 + 1e-15, ErrorKind::Validation,
            "noise.theta must lie in [0, pi/4], got " + std::to_string(theta));
    if (schedule.type == Schedule::Type::FixedInterval)
      require(schedule.interval >= 1, ErrorKind::Validation, "noise.schedule.interval must be >= 1");
    if (schedule.type == Schedule::Type::RandomTimes)
      require(schedule.count <= schedule.horizon, ErrorKind::Validation,
              "noise.schedule.count exceeds noise.schedule.horizon");
    if (channel == Channel::MultiCoin)
      require(coin_count >= 1, ErrorKind::Validation, "noise.coins must be >= 1");
  }
};

/// Per-step event probabilities resolved from a schedule. Step numbers start at 1.
class EventPlan {
 public:
  explicit EventPlan(const NoiseSpec& noise) : rate_(noise.rate), schedule_(noise.schedule) {
    noise.validate();
    if (schedule_.type == Schedule::Type::RandomTimes) {
      std::vector<std::size_t> steps(schedule_.horizon);
      for (std::size_t i = 0; i < steps.size(); ++i) steps[i] = i + 1;
      CounterRng rng(schedule_.seed, 0x7363686564ULL, 0);
      for (std::size_t i = 0; i < schedule_.count; ++i)
        std::swap(steps[i], steps[i + rng.below(steps.size() - i)]);
      times_.assign(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(schedule_.count));
      std::sort(times_.begin(), times_.end());
    }
  }

  [[nodiscard]] double probability(std::size_t step) const {
    switch (schedule_.type) {
      case Schedule::Type::PerStep: return rate_;
      case Schedule::Type::FixedInterval: return step % schedule_.interval == 0 ? 1.0 : 0.0;
      case Schedule::Type::RandomTimes:
        return std::binary_search(times_.begin(), times_.end(), step) ? 1.0 : 0.0;
    }
    return 0.0;
  }

  [[nodiscard]] const std::vector<std::size_t>& random_times() const noexcept { return times_; }

 private:
  double rate_;
  Schedule schedule_;
  std::vector<std::size_t> times_;
};

}  // namespace qwalk
