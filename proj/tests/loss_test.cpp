#include <gtest/gtest.h>

#include <cmath>

#include "ldgm/loss.hpp"
#include "oracles.hpp"

using namespace ldgm;

namespace {

std::vector<ProblemSpec> annihilation_suite() {
  std::vector<ProblemSpec> s{beam(), mkdv(), kdv()};
  for (int d = 1; d <= 5; ++d) s.push_back(heat_nd(d));
  return s;
}

std::vector<ProblemSpec> evolution_problems() {
  return {beam(), mkdv(), kdv(), heat_nd(2), cahn_hilliard(0.1), allen_cahn(0.1)};
}

SamplerConfig small_sampler(std::uint64_t seed = 3) {
  SamplerConfig c;
  c.interior = 40;
  c.initial = 10;
  c.boundary = 10;
  c.seed = seed;
  return c;
}

NetworkConfig small_net(const ProblemSpec& spec, int outputs, int width = 5) {
  NetworkConfig c;
  c.input_dim = spec.input_dim();
  c.hidden_layers = 2;
  c.width = width;
  c.output_dim = outputs;
  return c;
}

void expect_all_small(const LossBreakdown& l, const std::string& what) {
  EXPECT_LT(l.equation.scalar(), 1e-9) << what;
  EXPECT_LT(l.initial.scalar(), 1e-9) << what;
  EXPECT_LT(l.boundary.scalar(), 1e-9) << what;
  for (const auto& [label, t] : l.terms) EXPECT_LT(t.scalar(), 1e-9) << what << " " << label;
}

}  // namespace

TEST(Annihilation, LdgmBothOrders) {
  for (const auto& spec : annihilation_suite()) {
    const auto batch = draw_batch({1000, 200, 200, 7}, spec, 0);
    for (int order : {1, 2}) {
      const auto sys = rewrite(spec, order);
      BatchTape tape;
      const auto field = MockField::of_system(spec, sys, tape);
      expect_all_small(ldgm_loss(spec, sys, field, batch),
                       spec.name + " d=" + std::to_string(spec.dim) + " order " + std::to_string(order));
    }
  }
}

TEST(Annihilation, Dgm) {
  for (const auto& spec : annihilation_suite()) {
    const auto batch = draw_batch({1000, 200, 200, 7}, spec, 0);
    BatchTape tape;
    const auto field = MockField::of_solution(spec, tape);
    expect_all_small(dgm_loss(spec, field, batch), spec.name + " d=" + std::to_string(spec.dim));
  }
}

TEST(Ldgm, CahnHilliardHasFourEquationTerms) {
  const auto spec = cahn_hilliard(0.1);
  const auto sys = rewrite(spec, 1);
  BatchTape tape;
  NetworkField field(init_xavier(small_net(spec, 4), 1), tape);
  const auto l = ldgm_loss(spec, sys, field, draw_batch(small_sampler(), spec, 0));
  ASSERT_EQ(l.terms.size(), 4u);
  double sum = 0.0;
  for (const auto& [label, t] : l.terms) sum += t.scalar();
  EXPECT_NEAR(sum, l.equation.scalar(), 1e-12 * sum);
}

TEST(Ldgm, RosterMismatchIsShapeError) {
  const auto spec = beam();
  BatchTape tape;
  NetworkField field(init_xavier(small_net(spec, 3), 1), tape);
  EXPECT_THROW(ldgm_loss(spec, rewrite(spec, 1), field, draw_batch(small_sampler(), spec, 0)), ShapeError);
}

TEST(Loss, ZeroBoundaryWeightIgnoresBoundaryBatch) {
  auto spec = mkdv();
  spec.weights.boundary = 0.0;
  const auto params = init_xavier(small_net(spec, 3), 2);
  const auto sys = rewrite(spec, 1);
  auto a = draw_batch(small_sampler(1), spec, 0);
  auto b = a;
  b.boundary = draw_batch(small_sampler(99), spec, 5).boundary;
  BatchTape t1, t2;
  NetworkField f1(params, t1), f2(params, t2);
  const auto la = ldgm_loss(spec, sys, f1, a), lb = ldgm_loss(spec, sys, f2, b);
  EXPECT_NE(la.boundary.scalar(), lb.boundary.scalar());
  EXPECT_EQ(la.total.scalar(), lb.total.scalar());
}

TEST(Dgm, JetCapBelowPdeOrder) {
  const auto spec = beam();
  BatchTape tape;
  NetworkField field(init_xavier(small_net(spec, 1), 1), tape);
  const auto batch = draw_batch(small_sampler(), spec, 0);
  EXPECT_THROW(dgm_loss(spec, field, batch, 3), UnsupportedOrderError);
  EXPECT_NO_THROW(dgm_loss(spec, field, batch, 4));
}

TEST(Dgm, ReluIsNotSmoothEnough) {
  const auto spec = beam();
  auto cfg = small_net(spec, 1);
  cfg.hidden_activation = Activation::relu();
  BatchTape tape;
  NetworkField field(init_xavier(cfg, 1), tape);
  EXPECT_THROW(dgm_loss(spec, field, draw_batch(small_sampler(), spec, 0)), SmoothnessError);
}

TEST(Dgm, RejectsMultipleOutputsAndStationary) {
  const auto spec = beam();
  BatchTape tape;
  NetworkField two(init_xavier(small_net(spec, 2), 1), tape);
  EXPECT_THROW(dgm_loss(spec, two, draw_batch(small_sampler(), spec, 0)), ShapeError);
  const auto ritz = bilaplacian_ritz(1);
  NetworkField one(init_xavier(small_net(ritz, 1), 1), tape);
  EXPECT_THROW(dgm_loss(ritz, one, draw_batch(small_sampler(), ritz, 0)), OrderError);
}

TEST(Loss, InitialTermIdenticalAcrossMethods) {
  // A one-output net and a four-output net whose first output row is the same.
  const auto spec = beam();
  const auto multi = init_xavier(small_net(spec, 4), 5);
  ParameterSet single = zero_parameters(small_net(spec, 1));
  single.trunk = multi.trunk;
  single.branches[0].out.weight = multi.branches[0].out.weight.topRows(1);
  single.branches[0].out.bias = multi.branches[0].out.bias.head(1);
  const auto batch = draw_batch(small_sampler(), spec, 0);
  BatchTape t1, t2;
  NetworkField f1(multi, t1), f2(single, t2);
  EXPECT_EQ(ldgm_loss(spec, rewrite(spec, 1), f1, batch).initial.scalar(),
            dgm_loss(spec, f2, batch).initial.scalar());
}

TEST(Loss, GradientsMatchFiniteDifferences) {
  for (const auto& spec : evolution_problems()) {
    const auto batch = draw_batch(small_sampler(), spec, 0);
    for (int method = 0; method < 2; ++method) {
      const auto sys = rewrite(spec, 1);
      const int outputs = method == 0 ? sys.output_dim() : 1;
      ParameterSet p = init_xavier(small_net(spec, outputs), 17);
      auto loss_of = [&](const NetworkField& f) {
        return method == 0 ? ldgm_loss(spec, sys, f, batch) : dgm_loss(spec, f, batch);
      };
      BatchTape tape;
      NetworkField field(p, tape);
      const auto l = loss_of(field);
      const Eigen::VectorXd g = field.network().gradient(l.total);
      auto f = [&](const Eigen::VectorXd& theta) {
        ParameterSet q = p;
        q.assign(theta);
        BatchTape t;
        NetworkField nf(q, t);
        return loss_of(nf).total.scalar();
      };
      const Eigen::VectorXd fd = oracle::gradient_fd(f, p.flatten(), 1e-6);
      EXPECT_LT(oracle::rel_error(g, fd), 1e-5) << spec.name << (method == 0 ? " ldgm" : " dgm");
    }
  }
}

TEST(Loss, NonNegativeAndAdditive) {
  const auto problems = evolution_problems();
  std::mt19937_64 rng(2024);
  for (int draw = 0; draw < 100; ++draw) {
    auto spec = problems[static_cast<std::size_t>(draw) % problems.size()];
    std::uniform_real_distribution<double> w(0.0, 3.0);
    spec.weights = {w(rng), w(rng), w(rng)};
    const auto sys = rewrite(spec, 1 + draw % 2);
    const auto batch = draw_batch(small_sampler(static_cast<std::uint64_t>(draw)), spec, draw);
    BatchTape tape;
    NetworkField field(init_xavier(small_net(spec, sys.output_dim()), static_cast<std::uint64_t>(draw)), tape);
    const auto v = ldgm_loss(spec, sys, field, batch).values();
    EXPECT_GE(v.equation, 0.0);
    EXPECT_GE(v.initial, 0.0);
    EXPECT_GE(v.boundary, 0.0);
    const double expect = spec.weights.equation * v.equation + spec.weights.initial * v.initial +
                          spec.weights.boundary * v.boundary;
    EXPECT_NEAR(v.total, expect, 1e-12 * std::max(1.0, expect));
  }
}

TEST(Loss, PeriodicBoundaryVanishesForPeriodicNetwork) {
  // cos x is 2 pi periodic with all its derivatives.
  const auto spec = allen_cahn(0.1);
  const auto batch = draw_batch(small_sampler(), spec, 0);
  BatchTape tape;
  NetworkField net(init_xavier(small_net(spec, 1), 4), tape);
  EXPECT_GT(dgm_loss(spec, net, batch).boundary.scalar(), 0.0);

  ProblemSpec cosine = spec;
  cosine.exact = [](std::span<const double> x, double, std::span<const int> o) {
    return o[1] > 0 ? 0.0 : detail::sin_derivative(x[0] + std::numbers::pi / 2, o[0]);
  };
  BatchTape t2;
  const auto mock = MockField::of_solution(cosine, t2);
  EXPECT_LT(dgm_loss(cosine, mock, batch).boundary.scalar(), 1e-20);
}

TEST(Loss, MonteCarloErrorShrinksLikeInverseSqrtN) {
  const auto spec = heat_nd(1);
  const auto params = init_xavier(small_net(spec, 1, 8), 8);
  auto je = [&](int n, std::uint64_t seed) {
    SamplerConfig c{n, 1, 1, seed};
    BatchTape tape;
    NetworkField f(params, tape);
    return dgm_loss(spec, f, draw_batch(c, spec, 0)).equation.scalar();
  };
  const double truth = je(400000, 123456);
  std::vector<double> logn, logerr;
  for (int n : {100, 400, 1600, 6400}) {
    double ms = 0.0;
    const int reps = 40;
    for (int r = 0; r < reps; ++r) ms += std::pow(je(n, static_cast<std::uint64_t>(r + 1)) - truth, 2);
    logn.push_back(std::log(n));
    logerr.push_back(0.5 * std::log(ms / reps));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < logn.size(); ++i) mx += logn[i] / 4, my += logerr[i] / 4;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < logn.size(); ++i) {
    sxy += (logn[i] - mx) * (logerr[i] - my);
    sxx += (logn[i] - mx) * (logn[i] - mx);
  }
  const double slope = sxy / sxx;
  EXPECT_GT(slope, -0.7);
  EXPECT_LT(slope, -0.3);
}
