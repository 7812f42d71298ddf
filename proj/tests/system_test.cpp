#include <gtest/gtest.h>

#include "ldgm/loss.hpp"
#include "ldgm/system.hpp"

using namespace ldgm;

namespace {

std::vector<std::string> roles(const SystemForm& s) {
  std::vector<std::string> r;
  for (const auto& e : s.roster) r.push_back(e.role);
  return r;
}

// First-order transport, too low for a second-order rewrite.
ProblemSpec advection() {
  ProblemSpec p;
  p.name = "advection";
  p.domain = {{0.0}, {1.0}};
  p.horizon = 1.0;
  p.axis_order = {1};
  p.evolution = [](const SolutionView& v) { return v.dt() + v.dx(0, 1); };
  p.initial = [](std::span<const double> x) { return std::sin(x[0]); };
  return p;
}

double max_abs_strong_residual(const ProblemSpec& spec, int n, std::uint64_t seed) {
  BatchTape tape;
  const auto field = MockField::of_solution(spec, tape);
  const Eigen::MatrixXd pts = draw_interior(spec, n, seed, 0);
  DerivativeRequest req = DerivativeRequest::none(spec.input_dim());
  for (int a = 0; a < spec.dim; ++a) req.order[static_cast<std::size_t>(a)] = spec.axis_order[static_cast<std::size_t>(a)];
  req.order[static_cast<std::size_t>(spec.time_axis())] = 1;
  const auto out = field.evaluate(pts, req);
  const FieldView v(out, tape, pts, spec.time_axis());
  return spec.evolution(v).value().abs().maxCoeff();
}

}  // namespace

TEST(Rewrite, BeamFirstOrderRoster) {
  const auto s = rewrite(beam(), 1);
  EXPECT_EQ(roles(s), (std::vector<std::string>{"u", "u_x", "u_xx", "u_xxx"}));
  EXPECT_EQ(s.constraints.size(), 3u);
  EXPECT_EQ(s.boundary.size(), 2u);
  EXPECT_EQ(s.interior_needs.order, (std::vector<int>{1, 1}));
}

TEST(Rewrite, BeamSecondOrderRoster) {
  const auto s = rewrite(beam(), 2);
  EXPECT_EQ(roles(s), (std::vector<std::string>{"u", "u_xx", "u_xxxx"}));
  EXPECT_EQ(s.constraints.size(), 2u);
  EXPECT_EQ(s.interior_needs.order, (std::vector<int>{2, 1}));
}

TEST(Rewrite, CahnHilliardHasFourVariables) {
  const auto s = rewrite(cahn_hilliard(0.1), 1);
  EXPECT_EQ(roles(s), (std::vector<std::string>{"u", "u_x", "phi", "phi_x"}));
  EXPECT_EQ(s.constraints.size(), 3u);
  EXPECT_EQ(rewrite(cahn_hilliard(0.1), 2).output_dim(), 2);
}

TEST(Rewrite, MkdvAndKdv) {
  EXPECT_EQ(rewrite(mkdv(), 1).output_dim(), 3);
  EXPECT_EQ(roles(rewrite(kdv(), 2)), (std::vector<std::string>{"u", "u_xx"}));
}

TEST(Rewrite, HeatRosters) {
  const auto first = rewrite(heat_nd(5), 1);
  EXPECT_EQ(first.output_dim(), 6);
  EXPECT_EQ(first.index("u_x3"), 3);
  const auto second = rewrite(heat_nd(5), 2);
  EXPECT_EQ(roles(second), (std::vector<std::string>{"u", "v"}));
  EXPECT_EQ(second.roster[1].exact.size(), 5u);
}

TEST(Rewrite, RejectsLowOrderAndStationary) {
  EXPECT_THROW(rewrite(advection(), 2), OrderError);
  EXPECT_NO_THROW(rewrite(advection(), 1));
  EXPECT_THROW(rewrite(bilaplacian_ritz(1), 1), OrderError);
  EXPECT_THROW(rewrite(beam(), 3), OrderError);
  EXPECT_THROW(rewrite(beam(), 1).index("nope"), ShapeError);
}

TEST(ExactSolution, ClosedFormValues) {
  const double half_pi[1] = {std::numbers::pi / 2};
  EXPECT_DOUBLE_EQ(exact_solution(beam(), half_pi, 0.0), 1.0);
  const double two[1] = {2.0};
  EXPECT_NEAR(exact_solution(mkdv(), two, 1.0), std::tanh(3.0), 1e-15);
  const std::vector<double> origin(5, 0.0);
  EXPECT_EQ(exact_solution(heat_nd(5), origin, 0.7), 0.0);
  EXPECT_THROW(exact_solution(cahn_hilliard(0.1), half_pi, 0.0), UnavailableError);
}

TEST(ExactSolution, TanhDerivativesMatchClosedForms) {
  const double z = 0.37, y = std::tanh(z), s2 = 1 - y * y;
  EXPECT_NEAR(detail::tanh_derivative(z, 1), s2, 1e-14);
  EXPECT_NEAR(detail::tanh_derivative(z, 2), -2 * y * s2, 1e-14);
  EXPECT_NEAR(detail::tanh_derivative(z, 3), s2 * (6 * y * y - 2), 1e-14);
}

TEST(ExactSolution, AnnihilatesStrongForm) {
  std::vector<ProblemSpec> specs{beam(), mkdv(), kdv()};
  for (int d = 1; d <= 5; ++d) specs.push_back(heat_nd(d));
  for (const auto& s : specs) {
    EXPECT_LT(max_abs_strong_residual(s, 1000, 11), 1e-9) << s.name << " d=" << s.dim;
  }
}

TEST(ExactSolution, BilaplacianSource) {
  // Laplace^2 sin^2(pi x) = -8 pi^4 cos(2 pi x)
  const auto p = bilaplacian_ritz(1);
  for (double x : {0.0, 0.13, 0.5, 0.77}) {
    const double q[1] = {x};
    EXPECT_NEAR(bilaplacian_source(p, q), -8 * std::pow(std::numbers::pi, 4) * std::cos(2 * std::numbers::pi * x), 1e-9);
  }
}

TEST(Registry, KnownAndUnknownNames) {
  for (const auto& n : builtin_problem_names()) EXPECT_EQ(make_problem(n).name, n);
  EXPECT_EQ(make_problem("heat_nd", {{"d", 3}}).dim, 3);
  EXPECT_THROW(make_problem("wave"), ConfigError);
  EXPECT_THROW(heat_nd(0), ShapeError);
}
