#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <tsaa/asha.hpp>

using namespace tsaa;
using namespace tsaa::asha;

TEST_CASE("rung schedule from the geometric formula") {
  auto s = make_schedule(1, 5, 3);
  CHECK(s.rung_epochs == std::vector<int>{3});

  // eta^2 == R is dropped: the trial is already finished at that epoch
  auto s9 = make_schedule(1, 9, 3);
  CHECK(s9.rung_epochs == std::vector<int>{3});

  auto s2 = make_schedule(1, 2, 3);
  CHECK(s2.rung_epochs.empty());

  auto s10 = make_schedule(1, 10, 3);
  CHECK(s10.rung_epochs == std::vector<int>{3, 9});

  auto s27 = make_schedule(1, 28, 3);
  CHECK(s27.rung_epochs == std::vector<int>{3, 9, 27});

  CHECK_THROWS(make_schedule(3, 2, 3));
  CHECK_THROWS(make_schedule(1, 5, 1));
  CHECK_THROWS(make_schedule(0, 5, 3));
}

TEST_CASE("decide ranks against all reports so far") {
  RungTable table(3);
  CHECK(table.decide(3, 0, 0.3) == Decision::promote);  // first report: best so far
  CHECK(table.decide(3, 1, 0.2) == Decision::promote);  // still the current best
  CHECK(table.decide(3, 2, 0.1) == Decision::promote);  // N=3, K=1, rank 1
}

TEST_CASE("decide prunes a bottom-ranked report") {
  RungTable table(3);
  CHECK(table.decide(3, 0, 0.1) == Decision::promote);
  CHECK(table.decide(3, 1, 0.2) == Decision::prune);  // not the best while N < eta
  CHECK(table.decide(3, 2, 0.3) == Decision::prune);  // N=3, K=1, rank 3
}

TEST_CASE("duplicate report errors") {
  RungTable table(3);
  table.decide(3, 7, 0.5);
  CHECK_THROWS(table.decide(3, 7, 0.4));
  CHECK_THROWS(table.decide(9, 8, std::numeric_limits<double>::quiet_NaN()));
}

TEST_CASE("monotone pruning: worse than a pruned loss is pruned") {
  RungTable table(3);
  table.decide(3, 0, 0.1);
  CHECK(table.decide(3, 1, 0.5) == Decision::prune);
  // lots of even-worse reports later can never ride a growing K past trial 1
  for (int id = 2; id < 20; ++id)
    CHECK(table.decide(3, id, 0.5 + 0.01 * id) == Decision::prune);
}

TEST_CASE("promotable set is bounded by ceil(N/eta)") {
  Rng rng(17);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    RungTable table(3);
    const int n = 3 + rep;
    for (int id = 0; id < n; ++id) table.decide(3, id, ud(rng));
    auto promotable = table.currently_promotable(3);
    CHECK(promotable.size() <= static_cast<std::size_t>((n + 2) / 3));
  }
}

TEST_CASE("budget accounting") {
  CHECK(budget_bound(0.5, 8, 100) == 400);  // published arithmetic
  CHECK(budget_bound(0.5, 10, 50) == 250);
  CHECK(budget_bound(0.0, 10, 10) == 100);
  CHECK(budget_spent({}) == 0);

  std::vector<Trial> trials(3);
  trials[0].epochs_spent = 3;
  trials[1].epochs_spent = 5;
  trials[2].epochs_spent = 1;
  CHECK(budget_spent(trials) == 9);
}

TEST_CASE("simulated search respects rung spending rules") {
  // trials with random quality; survivors spend R epochs, first-rung prunes
  // spend exactly the first rung epoch
  Rng rng(5);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const int R = 5, r = 1, eta = 3;
  auto schedule = make_schedule(r, R, eta);
  REQUIRE(schedule.rung_epochs == std::vector<int>{3});
  RungTable table(eta);
  std::vector<Trial> trials;
  for (int id = 0; id < 40; ++id) {
    Trial t;
    t.trial_id = id;
    double quality = ud(rng);
    bool pruned = false;
    for (int rung : schedule.rung_epochs) {
      if (table.decide(rung, id, quality) == Decision::prune) {
        t.status = TrialStatus::pruned;
        t.pruned_at_rung = rung;
        t.epochs_spent = rung;
        pruned = true;
        break;
      }
    }
    if (!pruned) {
      t.status = TrialStatus::completed;
      t.epochs_spent = R;
    }
    trials.push_back(t);
  }
  long long spent = budget_spent(trials);
  CHECK(spent <= budget_bound(0.5, 10, 40));  // R = 10 - 5
  bool any_pruned = false;
  for (const auto& t : trials) {
    CHECK(t.epochs_spent <= R);
    if (t.status == TrialStatus::pruned) {
      any_pruned = true;
      CHECK(t.epochs_spent == schedule.rung_epochs[0]);
    } else {
      CHECK(t.epochs_spent == R);
    }
  }
  CHECK(any_pruned);
  CHECK(spent < budget_bound(0.5, 10, 40));  // non-degenerate pruning spends strictly less
}
