#pragma once

#include <map>
#include <mutex>

#include "tsaa/augment.hpp"
#include "tsaa/common.hpp"

namespace tsaa {
namespace asha {

// Geometric rung epochs eta^j * r for j = 1..floor(log_eta(R/r)). Rungs equal
// to R are dropped: a checkpoint at the final epoch cannot prune anything.
struct RungSchedule {
  int min_resource = 1;
  int max_resource = 1;
  int eta = 3;
  std::vector<int> rung_epochs;
};

inline RungSchedule make_schedule(int r, int R, int eta) {
  if (r < 1) throw std::invalid_argument("make_schedule: r must be >= 1");
  if (R < r) throw std::invalid_argument("make_schedule: R must be >= r");
  if (eta < 2) throw std::invalid_argument("make_schedule: eta must be >= 2");
  RungSchedule s;
  s.min_resource = r;
  s.max_resource = R;
  s.eta = eta;
  long long epoch = r;
  while (true) {
    if (epoch > R / eta) break;  // eta^j * r would exceed R
    epoch *= eta;
    if (epoch < R) s.rung_epochs.push_back(static_cast<int>(epoch));
  }
  return s;
}

enum class Decision { promote, prune };

enum class TrialStatus { running, pruned, completed, failed };

struct Trial {
  int trial_id = 0;
  SubPolicy subpolicy;
  TrialStatus status = TrialStatus::running;
  int pruned_at_rung = -1;  // rung epoch, when status == pruned
  std::vector<std::pair<int, double>> rung_losses;  // (epoch, val loss)
  double final_loss = std::numeric_limits<double>::infinity();
  int epochs_spent = 0;
};

// Shared promotion ledger. decide() is atomic: it records the report and
// ranks it against everything seen so far at that rung, never waiting for
// peers.
class RungTable {
 public:
  explicit RungTable(int eta) : eta_(eta) {
    if (eta < 2) throw std::invalid_argument("RungTable: eta must be >= 2");
  }

  Decision decide(int rung_epoch, int trial_id, double loss) {
    if (!std::isfinite(loss)) throw std::invalid_argument("RungTable::decide: loss must be finite");
    std::lock_guard<std::mutex> lock(mu_);
    auto& rung = rungs_[rung_epoch];
    for (const auto& [id, l] : rung.reports)
      if (id == trial_id) throw std::invalid_argument("RungTable::decide: duplicate report for trial " + std::to_string(trial_id));
    rung.reports.emplace_back(trial_id, loss);

    Decision d = rank_decision(rung, trial_id, loss);
    // monotone rule: anything strictly worse than an already-pruned loss at
    // this rung is pruned as well
    if (d == Decision::promote && loss > rung.best_pruned_loss) d = Decision::prune;
    if (d == Decision::prune) rung.best_pruned_loss = std::min(rung.best_pruned_loss, loss);
    return d;
  }

  std::size_t reports_at(int rung_epoch) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = rungs_.find(rung_epoch);
    return it == rungs_.end() ? 0 : it->second.reports.size();
  }

  // Re-ranks all current reports at a rung; used by the invariant tests.
  std::vector<int> currently_promotable(int rung_epoch) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<int> out;
    auto it = rungs_.find(rung_epoch);
    if (it == rungs_.end()) return out;
    auto sorted = it->second.reports;
    std::sort(sorted.begin(), sorted.end(), by_loss_then_id);
    auto n = sorted.size();
    std::size_t keep = std::max<std::size_t>(n / static_cast<std::size_t>(eta_), 1);
    for (std::size_t i = 0; i < std::min(keep, n); ++i) out.push_back(sorted[i].first);
    return out;
  }

 private:
  struct Rung {
    std::vector<std::pair<int, double>> reports;
    double best_pruned_loss = std::numeric_limits<double>::infinity();
  };

  static bool by_loss_then_id(const std::pair<int, double>& a, const std::pair<int, double>& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;  // earlier trial wins ties
  }

  Decision rank_decision(const Rung& rung, int trial_id, double loss) const {
    const auto n = rung.reports.size();
    const auto top_k = n / static_cast<std::size_t>(eta_);
    if (top_k == 0) {
      // fewer than eta reports: promote only a current best
      for (const auto& [id, l] : rung.reports)
        if (l < loss || (l == loss && id < trial_id)) return Decision::prune;
      return Decision::promote;
    }
    std::size_t rank = 1;
    for (const auto& [id, l] : rung.reports) {
      if (id == trial_id) continue;
      if (l < loss || (l == loss && id < trial_id)) ++rank;
    }
    return rank <= top_k ? Decision::promote : Decision::prune;
  }

  int eta_;
  mutable std::mutex mu_;
  std::map<int, Rung> rungs_;
};

inline long long budget_spent(const std::vector<Trial>& trials) {
  long long total = 0;
  for (const auto& t : trials) total += t.epochs_spent;
  return total;
}

// Worst-case epoch budget of the search phase: (K - floor(beta*K)) * T_max.
inline long long budget_bound(double beta, int K, int T_max) {
  auto shared = static_cast<long long>(std::floor(beta * K));
  return (K - shared) * static_cast<long long>(T_max);
}

}  // namespace asha
}  // namespace tsaa
