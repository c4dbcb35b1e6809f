#include <doctest.h>

#include <cmath>

#include "adaptmix/optim.hpp"
#include "adaptmix/rng.hpp"

using namespace adaptmix;

namespace {

ScheduleConfig schedule(long warmup, long total, double peak) {
  ScheduleConfig cfg;
  cfg.warmup_steps = warmup;
  cfg.total_steps = total;
  cfg.peak_lr = peak;
  cfg.floor_fraction = 0.1;
  return cfg;
}

}  // namespace

TEST_CASE("lr schedule endpoints and midpoint") {
  const ScheduleConfig cfg = schedule(200, 1200, 1.0);
  CHECK(lr_at(0, cfg) == doctest::Approx(0.0));
  CHECK(lr_at(200, cfg) == doctest::Approx(1.0));
  CHECK(lr_at(1200, cfg) == doctest::Approx(0.1).epsilon(1e-12));
  // Midpoint of the decay phase: peak * (0.1 + 0.9*(1+cos(pi/2))/2).
  CHECK(lr_at(700, cfg) == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("lr schedule is continuous at the warmup boundary") {
  const ScheduleConfig cfg = schedule(200, 100200, 2.0);
  CHECK(lr_at(200, cfg) == doctest::Approx(2.0));
  CHECK(lr_at(201, cfg) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(lr_at(199, cfg) == doctest::Approx(2.0 * 199.0 / 200.0).epsilon(1e-12));
}

TEST_CASE("lr schedule validates configuration and range") {
  const ScheduleConfig cfg = schedule(200, 1000, 1.0);
  CHECK_THROWS(lr_at(-1, cfg));
  CHECK_THROWS(lr_at(1001, cfg));
  CHECK_THROWS(lr_at(0, schedule(200, 200, 1.0)));
  ScheduleConfig bad = cfg;
  bad.floor_fraction = 0.0;
  CHECK_THROWS(lr_at(0, bad));
  bad = cfg;
  bad.peak_lr = 0.0;
  CHECK_THROWS(lr_at(0, bad));
}

TEST_CASE("global-norm clipping") {
  std::vector<double> g{3.0, 4.0};
  const double norm = clip_global_norm(g, 1.0);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));

  std::vector<double> small{0.3, 0.4};
  clip_global_norm(small, 1.0);
  CHECK(small[0] == doctest::Approx(0.3));
  CHECK(small[1] == doctest::Approx(0.4));

  std::vector<double> untouched{30.0, 40.0};
  clip_global_norm(untouched, 0.0);  // 0 disables
  CHECK(untouched[0] == doctest::Approx(30.0));

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(1 + rng.next_below(8));
    for (double& x : v) x = rng.uniform(-5.0, 5.0);
    const std::vector<double> before = v;
    const double max_norm = rng.uniform(0.1, 6.0);
    const double pre = clip_global_norm(v, max_norm);
    double post = 0.0;
    for (const double x : v) post += x * x;
    post = std::sqrt(post);
    CHECK(post == doctest::Approx(std::min(pre, max_norm)).epsilon(1e-12));
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::fabs(v[i]) <= std::fabs(before[i]) + 1e-15);
  }
}

TEST_CASE("adamw: zero gradient and zero decay is a fixed point") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  std::vector<double> params{1.0, -2.0, 3.0};
  OptimState state = OptimState::init(params.size());
  const std::vector<double> grads(3, 0.0);
  optimizer_step(params, grads, state, cfg, 0.1);
  CHECK(params == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("adamw: one step descends a simple quadratic") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  std::vector<double> params{1.0};
  OptimState state = OptimState::init(1);
  const std::vector<double> grads{1.0};  // d(theta^2/2) at theta=1
  optimizer_step(params, grads, state, cfg, 0.01);
  CHECK(params[0] < 1.0);
  CHECK(0.5 * params[0] * params[0] < 0.5);
}

TEST_CASE("adamw: 500 scheduled steps converge on the 2-d quadratic") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  const ScheduleConfig sched_cfg = schedule(10, 500, 0.05);
  const std::vector<double> center{1.0, -1.0};
  std::vector<double> params{0.0, 0.0};
  OptimState state = OptimState::init(2);
  for (long step = 1; step <= 500; ++step) {
    const std::vector<double> grads{params[0] - center[0], params[1] - center[1]};
    optimizer_step(params, grads, state, cfg, lr_at(step, sched_cfg));
  }
  const double dist = std::hypot(params[0] - center[0], params[1] - center[1]);
  CHECK(dist < 1e-3);
}

TEST_CASE("adamw is deterministic given identical inputs") {
  AdamWConfig cfg;
  Rng rng(9);
  std::vector<double> a(16), b(16), g(16);
  for (std::size_t i = 0; i < 16; ++i) {
    a[i] = b[i] = rng.uniform(-1.0, 1.0);
    g[i] = rng.uniform(-1.0, 1.0);
  }
  OptimState sa = OptimState::init(16);
  OptimState sb = OptimState::init(16);
  for (int step = 0; step < 25; ++step) {
    optimizer_step(a, g, sa, cfg, 0.01);
    optimizer_step(b, g, sb, cfg, 0.01);
  }
  CHECK(a == b);
}

TEST_CASE("adamw: decoupled weight decay shrinks parameters even with zero gradient") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.1;
  std::vector<double> params{1.0};
  OptimState state = OptimState::init(1);
  optimizer_step(params, std::vector<double>{0.0}, state, cfg, 0.5);
  CHECK(params[0] == doctest::Approx(1.0 - 0.5 * 0.1 * 1.0));
}

TEST_CASE("adamw validates hyperparameters and sizes") {
  AdamWConfig cfg;
  cfg.beta1 = 1.0;
  std::vector<double> params{1.0};
  OptimState state = OptimState::init(1);
  CHECK_THROWS(optimizer_step(params, std::vector<double>{0.0}, state, cfg, 0.1));
  cfg = AdamWConfig{};
  CHECK_THROWS(optimizer_step(params, std::vector<double>{0.0, 1.0}, state, cfg, 0.1));
}
