#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "ppde/expectation.hpp"
#include "ppde/functionals.hpp"
#include "ppde/smooth.hpp"
#include "ppde/solvers.hpp"
#include "ppde/tree.hpp"
#include "ppde/viscosity.hpp"

using namespace ppde;

namespace {

// Suffix view over a plain vector of values spaced h apart.
PathView suffix_view(const std::vector<double>& vals, double h) {
  return PathView{h, 1, {vals.data(), vals.size()}};
}

double drive(const Jet& j) { return j.time_slope + 0.5 * j.curvature; }

}  // namespace

TEST_CASE("localization windows and realized exits") {
  TimeGrid grid(1.0, 16);
  Localization def = Localization::defaults(grid);
  CHECK(def.max_steps == 4);
  CHECK(def.radius == doctest::Approx(4.0 * std::sqrt(4.0 / 16.0)).epsilon(1e-15));

  CHECK_THROWS_AS((Localization{0.0, 3}.validate()), input_error);
  CHECK_THROWS_AS((Localization{1.0, 0}.validate()), input_error);
  CHECK_THROWS_AS((Localization{1.0, 3}.shrunk(0.0)), input_error);
  CHECK_THROWS_AS((Localization{1.0, 3}.shrunk(1.5)), input_error);

  // A deterministic climb: reaches displacement k/4 at step k.
  std::vector<double> climb(13);
  for (int i = 0; i <= 12; ++i) climb[static_cast<std::size_t>(i)] = 0.25 * i;
  Localization win{1.0, 10};
  CHECK(win.exit_index(suffix_view(climb, 1.0 / 16)) == 4);
  CHECK((Localization{0.1, 10}.exit_index(suffix_view(climb, 1.0 / 16))) == 1);   // H >= 1
  CHECK((Localization{100.0, 10}.exit_index(suffix_view(climb, 1.0 / 16))) == 10);  // step cap
  CHECK((Localization{100.0, 50}.exit_index(suffix_view(climb, 1.0 / 16))) == 12);  // path end

  // Exits never come later under meet or shrink, and never before step one.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> jump(-0.6, 0.6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> path(17, 0.0);
    for (int i = 1; i <= 16; ++i) path[static_cast<std::size_t>(i)] = path[i - 1] + jump(rng);
    Localization a{0.4 + 0.2 * (trial % 5), 3 + trial % 9};
    Localization b{0.3 + 0.25 * (trial % 4), 2 + trial % 11};
    PathView v = suffix_view(path, 1.0 / 16);
    int ha = a.exit_index(v), hb = b.exit_index(v);
    int hm = a.meet(b).exit_index(v);
    CHECK(ha >= 1);
    CHECK(hm <= std::min(ha, hb));
    CHECK(a.shrunk(0.5).exit_index(v) <= ha);
  }
}

TEST_CASE("tangency verdicts on the flat and linear candidates") {
  TimeGrid grid(1.0, 16);
  ScenarioTree tree(grid);
  Localization win{10.0, 4};  // radius never reached: the window stays open 4 steps
  CandidateProcess flat = candidate_from_field("flat", [](const PathPoint&) { return 0.0; });
  CandidateProcess lin = candidate_martingale("terminal", terminal_value());

  std::vector<PathPoint> pts = {PathPoint::origin(grid), node_point(tree, 5, 19)};
  for (const PathPoint& at : pts) {
    for (double L : {0.0, 0.5}) {
      // The slope-one jet differs from w by a constant: tangent on both sides.
      for (Side side : {Side::sub, Side::super}) {
        TangencyReport rep =
            tangency_in_mean(lin, at, Jet{0.0, 1.0, 0.0}, win, DriftBound(L), side);
        CHECK(std::abs(rep.gap) <= 1e-12);
        CHECK(rep.verdict == (side == Side::sub ? Tangency::from_above : Tangency::from_below));
        CHECK(rep.generator_value == 0.0);
        CHECK(rep.depth == 4);
        CHECK(rep.window_time == doctest::Approx(4.0 / 16.0).epsilon(1e-15));
      }
    }

    // Pure time slopes against the zero candidate: +s is minimal at the
    // anchor (tangent from above, exact), -s is not.
    TangencyReport up = tangency_in_mean(flat, at, Jet{1.0, 0.0, 0.0}, win, DriftBound(0.5),
                                         Side::sub);
    CHECK(up.gap == 0.0);
    CHECK(up.verdict == Tangency::from_above);
    CHECK(up.generator_value == -1.0);

    TangencyReport down =
        tangency_in_mean(flat, at, Jet{-1.0, 0.0, 0.0}, win, DriftBound(0.5), Side::sub);
    CHECK(down.gap == -0.25);  // rides to the window edge: -1 * (4 steps * h)
    CHECK(down.verdict == Tangency::neither);

    TangencyReport sup =
        tangency_in_mean(flat, at, Jet{1.0, 0.0, 0.0}, win, DriftBound(0.5), Side::super);
    CHECK(sup.gap == 0.25);
    CHECK(sup.verdict == Tangency::neither);
  }

  // Terminal anchors have no room to test.
  CHECK_THROWS_AS(tangency_in_mean(flat, node_point(tree, 16, 100), Jet{0.0, 0.0, 0.0}, win,
                                   DriftBound(0.0), Side::sub),
                  input_error);
  // Near the horizon the window clamps to the remaining steps.
  TangencyReport clamped = tangency_in_mean(flat, node_point(tree, 14, 9), Jet{1.0, 0.0, 0.0},
                                            win, DriftBound(0.0), Side::sub);
  CHECK(clamped.depth == 2);
}

TEST_CASE("localized envelope matches stopping enumeration") {
  TimeGrid grid(1.0, 16);
  ScenarioTree tree(grid);
  PathPoint at = node_point(tree, 3, 5);
  CandidateProcess flat = candidate_from_field("flat", [](const PathPoint&) { return 0.0; });

  const Jet jet{-0.7, 0.8, 1.5};
  const double L = 0.3;
  const int m = 4;
  TimeGrid sub_grid(m * grid.step(), m);
  ScenarioTree sub_tree(sub_grid);
  const double inc = sub_tree.increment();
  Localization win{1.5 * inc, m};

  // Rebuild the masked obstacle by hand: jet value at each in-window node,
  // frozen along each path from its first exit.
  oracle::LevelValues x(static_cast<std::size_t>(m) + 1);
  oracle::LevelValues exited(static_cast<std::size_t>(m) + 1);
  for (int l = 0; l <= m; ++l) {
    x[static_cast<std::size_t>(l)].resize(std::size_t{1} << l);
    exited[static_cast<std::size_t>(l)].resize(std::size_t{1} << l);
  }
  for (int l = 0; l <= m; ++l) {
    for (std::uint64_t j = 0; j < (std::uint64_t{1} << l); ++j) {
      int ups = 0;
      for (int b = 0; b < l; ++b) ups += static_cast<int>((j >> b) & 1u);
      double d = (2.0 * ups - l) * inc;
      bool from_parent = l > 0 && exited[l - 1][j >> 1] > 0.5;
      if (from_parent) {
        x[static_cast<std::size_t>(l)][j] = x[static_cast<std::size_t>(l) - 1][j >> 1];
        exited[static_cast<std::size_t>(l)][j] = 1.0;
        continue;
      }
      x[static_cast<std::size_t>(l)][j] = jet.time_slope * sub_grid.time(l) + jet.slope * d +
                                          0.5 * jet.curvature * d * d;
      exited[static_cast<std::size_t>(l)][j] = (l > 0 && std::abs(d) >= win.radius) ? 1.0 : 0.0;
    }
  }

  oracle::LevelValues neg = x;
  for (auto& lvl : neg)
    for (double& v : lvl) v = -v;

  double min_env = -oracle::snell_endpoint_enumeration(neg, sub_grid.step(), L);
  double max_env = oracle::snell_endpoint_enumeration(x, sub_grid.step(), L);

  TangencyReport sub =
      tangency_in_mean(flat, at, jet, win, DriftBound(L), Side::sub);
  TangencyReport sup =
      tangency_in_mean(flat, at, jet, win, DriftBound(L), Side::super);
  CHECK(sub.envelope_origin == doctest::Approx(min_env).epsilon(1e-12));
  CHECK(sup.envelope_origin == doctest::Approx(max_env).epsilon(1e-12));
  CHECK(sub.gap <= 0.0);
  CHECK(sup.gap >= 0.0);
}

TEST_CASE("acceptance thresholds follow the realized window") {
  TimeGrid grid(1.0, 16);
  PathPoint origin = PathPoint::origin(grid);
  CandidateProcess flat = candidate_from_field("flat", [](const PathPoint&) { return 0.0; });

  // One-step window: every first move exits, so the open time is a single h.
  ScenarioTree probe(TimeGrid(4.0 / 16.0, 4));
  Localization tight{probe.increment(), 4};
  TangencyReport curved = tangency_in_mean(flat, origin, Jet{0.0, 0.0, -2.0}, tight,
                                           DriftBound(0.0), Side::sub);
  CHECK(curved.window_time == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
  CHECK(curved.gap == doctest::Approx(-1.0 / 16.0).epsilon(1e-12));
  CHECK(curved.verdict == Tangency::neither);  // a 1-step window still rejects it

  // Compensating the curvature in time restores tangency through the same
  // window: the one-step drive q + g/2 vanishes.
  TangencyReport level = tangency_in_mean(flat, origin, Jet{1.0, 0.0, -2.0}, tight,
                                          DriftBound(0.0), Side::sub);
  CHECK(std::abs(level.gap) <= 1e-14);
  CHECK(level.verdict == Tangency::from_above);

  // Wide window: mildly negative drives sit inside the default acceptance
  // width, strongly negative ones fall out.
  Localization wide{10.0, 4};
  TangencyReport close = tangency_in_mean(flat, origin, Jet{-0.3, 0.0, 0.0}, wide,
                                          DriftBound(0.0), Side::sub);
  CHECK(close.verdict == Tangency::from_above);  // |drive| 0.3 <= 5h(1+1.3)
  TangencyReport far = tangency_in_mean(flat, origin, Jet{-0.9, 0.0, 0.0}, wide,
                                        DriftBound(0.0), Side::sub);
  CHECK(far.verdict == Tangency::neither);  // |drive| 0.9 > 5h(1+1.9)
}

TEST_CASE("martingale candidates accept exactly the nonnegative drives") {
  TimeGrid grid(1.0, 16);
  ScenarioTree tree(grid);
  Localization win{10.0, 4};
  CandidateProcess u = candidate_martingale("terminal", terminal_value());
  const double h = grid.step();

  for (const PathPoint& at : {PathPoint::origin(grid), node_point(tree, 3, 6)}) {
    for (double q : {-2.0, -1.0, -0.25, 0.0, 0.25, 1.5}) {
      for (double g : {-3.0, -1.0, 0.0, 2.0}) {
        for (double p : {-1.0, 0.0, 2.0}) {
          Jet jet{q, p, g};
          double c = drive(jet);
          double width = default_jet_tolerance(h, jet);
          if (std::abs(c) > 1e-9 && std::abs(std::abs(c) - width) < 0.05)
            continue;  // skip jets sitting on the acceptance boundary
          TangencyReport sub = tangency_in_mean(u, at, jet, win, DriftBound(0.0), Side::sub);
          TangencyReport sup = tangency_in_mean(u, at, jet, win, DriftBound(0.0), Side::super);

          bool sub_tangent = c >= 0.0 || std::abs(c) <= width;
          bool sup_tangent = c <= 0.0 || std::abs(c) <= width;
          CHECK((sub.verdict == Tangency::from_above) == sub_tangent);
          CHECK((sup.verdict == Tangency::from_below) == sup_tangent);

          // Optional stopping on the tree: the stopped mean of the jet is
          // drive * (open time), so the gap is its negative part.
          CHECK(sub.gap ==
                doctest::Approx(std::min(0.0, c) * sub.window_time).epsilon(1e-10));
          CHECK(sup.gap ==
                doctest::Approx(std::max(0.0, c) * sup.window_time).epsilon(1e-10));
        }
      }
    }
  }
}

TEST_CASE("classical paraboloids pass or fail the checks by their residual") {
  TimeGrid grid(1.0, 32);
  PathPoint origin = PathPoint::origin(grid);
  Localization win{10.0, 8};
  JetSearch search = JetSearch::defaults();
  Generator heat = Generator::heat();
  DriftBound none(0.0);

  auto parab = [](double q0, double p0, double g0) {
    return candidate_from_field("parab", [=](const PathPoint& pt) {
      double x = pt.current();
      return q0 * pt.t() + p0 * x + 0.5 * g0 * x * x;
    });
  };

  // Residual -q0 - g0/2 = 0: an exact solution passes on both sides.
  CandidateProcess exact = parab(-0.3, 0.4, 0.6);
  CHECK(subsolution_check(exact, heat, origin, search, win, none).verdict == Verdict::pass);
  CHECK(supersolution_check(exact, heat, origin, search, win, none).verdict == Verdict::pass);

  // Residual -0.7 < 0: a strict subsolution. The sub check passes; the super
  // check must reject it with witnesses around the residual size.
  CandidateProcess strict_sub = parab(0.5, 0.0, 0.4);
  CheckReport ss = subsolution_check(strict_sub, heat, origin, search, win, none);
  CHECK(ss.verdict == Verdict::pass);
  CHECK(ss.witnesses.empty());
  CHECK(ss.tangent > 0);
  CheckReport sf = supersolution_check(strict_sub, heat, origin, search, win, none);
  CHECK(sf.verdict == Verdict::fail);
  CHECK(!sf.witnesses.empty());
  CHECK(sf.worst_margin >= 0.49);

  // Residual +0.5 > 0: a strict supersolution, mirrored.
  CandidateProcess strict_super = parab(-0.5, 0.3, 0.0);
  CheckReport fs = subsolution_check(strict_super, heat, origin, search, win, none);
  CHECK(fs.verdict == Verdict::fail);
  CHECK(fs.worst_margin >= 0.49);
  CHECK(supersolution_check(strict_super, heat, origin, search, win, none).verdict ==
        Verdict::pass);

  // Every reported witness repeats a violation above its own tolerance.
  for (const JetWitness& w : sf.witnesses) {
    CHECK(w.margin > w.tolerance);
    CHECK(w.margin == -(-w.jet.time_slope - 0.5 * w.jet.curvature));
  }
}

TEST_CASE("heat value processes pass both checks at sampled points") {
  TimeGrid grid(1.0, 16);
  ScenarioTree tree(grid);
  Localization win = Localization::defaults(grid);
  JetSearch search = JetSearch::defaults();
  Generator heat = Generator::heat();
  DriftBound none(0.0);

  CandidateProcess square = candidate_martingale("square", terminal_square());
  CandidateProcess kink = candidate_martingale("kink", value_at_time(grid.time(8)));

  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    int level = static_cast<int>(rng() % 14);
    std::uint64_t id = rng() & ((std::uint64_t{1} << level) - 1);
    PathPoint at = node_point(tree, level, id);
    CHECK(subsolution_check(square, heat, at, search, win, none).verdict == Verdict::pass);
    CHECK(supersolution_check(square, heat, at, search, win, none).verdict == Verdict::pass);
    ++checked;
  }
  CHECK(checked == 12);

  // The kinked fixed-time candidate stays a solution through its kink.
  for (std::uint64_t id : {std::uint64_t{0}, std::uint64_t{37}, std::uint64_t{200}}) {
    PathPoint at = node_point(tree, 8, id);  // anchored exactly at the kink time
    CHECK(subsolution_check(kink, heat, at, search, win, none).verdict == Verdict::pass);
    CHECK(supersolution_check(kink, heat, at, search, win, none).verdict == Verdict::pass);
  }
  for (int level : {2, 5, 11}) {
    PathPoint at = node_point(tree, level, (std::uint64_t{1} << level) / 3);
    CHECK(subsolution_check(kink, heat, at, search, win, none).verdict == Verdict::pass);
    CHECK(supersolution_check(kink, heat, at, search, win, none).verdict == Verdict::pass);
  }
}

TEST_CASE("time tilts break exactly one side of each characterization") {
  TimeGrid grid(1.0, 16);
  ScenarioTree tree(grid);
  Localization win{10.0, 4};
  JetSearch search = JetSearch::defaults();
  Generator heat = Generator::heat();
  DriftBound none(0.0);

  CandidateProcess base = candidate_martingale("terminal", terminal_value());
  CandidateProcess upper = candidate_tilted(base, 1.0);
  CandidateProcess lower = candidate_tilted(base, -1.0);

  for (const PathPoint& at : {PathPoint::origin(grid), node_point(tree, 2, 1)}) {
    // Pure martingale: optimal stopping cannot beat immediate stopping, in
    // either direction, and the value recursion reproduces itself exactly.
    MartingaleReport msub = regular_submartingale_check(base, at, none);
    MartingaleReport msup = regular_supermartingale_check(base, at, none);
    CHECK(msub.gap == 0.0);
    CHECK(msup.gap == 0.0);
    CHECK(msub.verdict == Verdict::pass);
    CHECK(msup.verdict == Verdict::pass);

    //

    MartingaleReport tsub = regular_submartingale_check(upper, at, none);
    MartingaleReport tsup = regular_supermartingale_check(upper, at, none);
    CHECK(tsub.verdict == Verdict::pass);
    CHECK(tsub.gap <= 1e-12);
    CHECK(tsup.verdict == Verdict::fail);
    CHECK(tsup.gap == doctest::Approx(1.0 - at.t()).epsilon(1e-12));

    CHECK(subsolution_check(upper, heat, at, search, win, none).verdict == Verdict::pass);
    CheckReport broken = supersolution_check(upper, heat, at, search, win, none);
    CHECK(broken.verdict == Verdict::fail);
    CHECK(broken.worst_margin >= 0.95);
    for (const JetWitness& w : broken.witnesses) CHECK(w.margin > w.tolerance);

    // The downward tilt mirrors everything.
    CHECK(regular_submartingale_check(lower, at, none).verdict == Verdict::fail);
    CHECK(regular_supermartingale_check(lower, at, none).verdict == Verdict::pass);
    CHECK(subsolution_check(lower, heat, at, search, win, none).verdict == Verdict::fail);
    CHECK(supersolution_check(lower, heat, at, search, win, none).verdict == Verdict::pass);
  }
}

TEST_CASE("stopped means classify canonical processes") {
  TimeGrid grid(1.0, 12);
  ScenarioTree tree(grid);
  DriftBound none(0.0);

  CandidateProcess square =
      candidate_from_field("w2", [](const PathPoint& pt) { return pt.current() * pt.current(); });
  CandidateProcess clock = candidate_from_field("-t", [](const PathPoint& pt) { return -pt.t(); });

  for (const PathPoint& at : {PathPoint::origin(grid), node_point(tree, 3, 5)}) {
    // w^2 gains h per step: a submartingale, and strictly not a super one.
    MartingaleReport sq_sub = regular_submartingale_check(square, at, none);
    CHECK(sq_sub.gap <= 1e-12);
    CHECK(sq_sub.verdict == Verdict::pass);
    MartingaleReport sq_sup = regular_supermartingale_check(square, at, none);
    CHECK(sq_sup.gap == doctest::Approx(1.0 - at.t()).epsilon(1e-12));
    CHECK(sq_sup.verdict == Verdict::fail);

    // -t drains deterministically: a supermartingale only.
    MartingaleReport ck_sub = regular_submartingale_check(clock, at, none);
    CHECK(ck_sub.gap == doctest::Approx(1.0 - at.t()).epsilon(1e-14));
    CHECK(ck_sub.verdict == Verdict::fail);
    MartingaleReport ck_sup = regular_supermartingale_check(clock, at, none);
    CHECK(ck_sup.gap == 0.0);
    CHECK(ck_sup.verdict == Verdict::pass);
  }

  // Worst-case drift variants: w - L(T-t) is a martingale for the lower
  // expectation, w + L(T-t) for the upper one.
  const double L = 0.8;
  CandidateProcess lower_mart = candidate_from_field(
      "lower", [L](const PathPoint& pt) { return pt.current() - L * (1.0 - pt.t()); });
  CandidateProcess upper_mart = candidate_from_field(
      "upper", [L](const PathPoint& pt) { return pt.current() + L * (1.0 - pt.t()); });
  DriftBound bound(L);
  PathPoint at = PathPoint::origin(grid);

  CHECK(regular_submartingale_check(lower_mart, at, bound).gap <= 1e-12);
  CHECK(regular_submartingale_check(lower_mart, at, bound).verdict == Verdict::pass);
  CHECK(regular_supermartingale_check(lower_mart, at, bound).verdict == Verdict::fail);

  CHECK(regular_supermartingale_check(upper_mart, at, bound).gap <= 1e-12);
  CHECK(regular_supermartingale_check(upper_mart, at, bound).verdict == Verdict::pass);
  CHECK(regular_submartingale_check(upper_mart, at, bound).verdict == Verdict::fail);

  // Plain w under a positive bound is regular on neither side.
  CandidateProcess walk =
      candidate_from_field("w", [](const PathPoint& pt) { return pt.current(); });
  CHECK(regular_submartingale_check(walk, at, bound).gap ==
        doctest::Approx(L * (1.0 - at.t())).epsilon(1e-12));
  CHECK(regular_submartingale_check(walk, at, bound).verdict == Verdict::fail);
  CHECK(regular_supermartingale_check(walk, at, bound).verdict == Verdict::fail);
}

TEST_CASE("jet reports compose additively and scale") {
  TimeGrid grid(1.0, 16);
  ScenarioTree tree(grid);
  Localization win{10.0, 4};
  DriftBound bound(0.4);
  CandidateProcess flat = candidate_from_field("flat", [](const PathPoint&) { return 0.0; });
  CandidateProcess mart = candidate_martingale("terminal", terminal_value());
  PathPoint at = node_point(tree, 2, 3);

  Jet j1{0.5, -0.75, 1.0};
  Jet j2{0.25, 1.0, -0.5};
  Jet sum = j1 + j2;
  CHECK(sum.time_slope == 0.75);
  CHECK(sum.slope == 0.25);
  CHECK(sum.curvature == 0.5);

  // The generator inequality value is additive across jets for linear G.
  Generator heat = Generator::heat();
  auto gv = [&](const Jet& j) {
    return tangency_in_mean(flat, at, j, win, bound, Side::sub, heat).generator_value;
  };
  CHECK(gv(sum) == doctest::Approx(gv(j1) + gv(j2)).epsilon(1e-14));

  // Doubling a jet doubles its obstacle, hence its envelope and gap, exactly.
  TangencyReport one = tangency_in_mean(flat, at, j1, win, bound, Side::sub);
  TangencyReport two = tangency_in_mean(flat, at, j1.scaled(2.0), win, bound, Side::sub);
  CHECK(two.gap == 2.0 * one.gap);
  CHECK(two.obstacle_origin == 2.0 * one.obstacle_origin);

  // Tangent jets at a martingale stay tangent under addition: nonnegative
  // drives are closed under sums.
  Jet t1{0.5, -1.0, 0.5};
  Jet t2{0.25, 2.0, 1.5};
  for (const Jet& j : {t1, t2, t1 + t2}) {
    TangencyReport rep = tangency_in_mean(mart, at, j, win, DriftBound(0.0), Side::sub);
    CHECK(rep.verdict == Tangency::from_above);
    CHECK(std::abs(rep.gap) <= 1e-12);
  }

  // Tightening the tolerance only removes accepted jets.
  CandidateProcess curved = candidate_martingale("square", terminal_square());
  std::vector<Jet> jets = JetSearch::defaults().enumerate();
  std::vector<int> tight_set, loose_set;
  for (std::size_t k = 0; k < jets.size(); ++k) {
    TangencyReport tight =
        tangency_in_mean(curved, at, jets[k], win, DriftBound(0.0), Side::sub, heat, 0.05);
    TangencyReport loose =
        tangency_in_mean(curved, at, jets[k], win, DriftBound(0.0), Side::sub, heat, 0.40);
    if (tight.verdict == Tangency::from_above) tight_set.push_back(static_cast<int>(k));
    if (loose.verdict == Tangency::from_above) loose_set.push_back(static_cast<int>(k));
  }
  CHECK(!tight_set.empty());
  CHECK(tight_set.size() < loose_set.size());
  CHECK(std::includes(loose_set.begin(), loose_set.end(), tight_set.begin(), tight_set.end()));
}

TEST_CASE("stopping and jet characterizations agree across the family") {
  TimeGrid grid(1.0, 16);
  ScenarioTree tree(grid);
  Localization win{10.0, 4};
  Generator heat = Generator::heat();
  DriftBound none(0.0);

  JetSearch coarse;
  for (int i = -2; i <= 2; ++i) coarse.time_slopes.push_back(static_cast<double>(i));
  coarse.slopes = coarse.time_slopes;
  for (int i = -2; i <= 2; ++i) coarse.curvatures.push_back(2.0 * i);

  std::vector<PathPoint> points = {PathPoint::origin(grid), node_point(tree, 1, 1),
                                   node_point(tree, 2, 1)};
  std::vector<CandidateProcess> family = standard_candidate_family(grid, 1.0);
  CHECK(family.size() == 9);

  EquivalenceReport report =
      equivalence_experiment(family, grid, points, heat, none, win, coarse);
  REQUIRE(report.rows.size() == 9);
  CHECK(report.all_consistent);

  for (std::size_t k = 0; k < report.rows.size(); ++k) {
    const EquivalenceRow& row = report.rows[k];
    CHECK(row.consistent);
    switch (k % 3) {
      case 0:  // the martingale itself: regular and a solution on both sides
        CHECK(row.martingale_sub == Verdict::pass);
        CHECK(row.martingale_super == Verdict::pass);
        CHECK(row.viscosity_sub == Verdict::pass);
        CHECK(row.viscosity_super == Verdict::pass);
        break;
      case 1:  // +tilt: submartingale and subsolution only
        CHECK(row.martingale_sub == Verdict::pass);
        CHECK(row.martingale_super == Verdict::fail);
        CHECK(row.viscosity_sub == Verdict::pass);
        CHECK(row.viscosity_super == Verdict::fail);
        break;
      default:  // -tilt: the mirror image
        CHECK(row.martingale_sub == Verdict::fail);
        CHECK(row.martingale_super == Verdict::pass);
        CHECK(row.viscosity_sub == Verdict::fail);
        CHECK(row.viscosity_super == Verdict::pass);
        break;
    }
  }

  CHECK_THROWS_AS(
      equivalence_experiment(family, grid, {}, heat, none, win, coarse), input_error);
}

TEST_CASE("order propagates from terminal data") {
  TimeGrid grid(1.0, 12);

  PathFunctional bumped("terminal_plus", 1, [](const PathView& w) {
    return w.at(w.last_index(), 0) + 0.2;
  });
  CandidateProcess u = candidate_martingale("u", terminal_value());
  CandidateProcess v = candidate_martingale("v", bumped);

  ComparisonReport ok = comparison_check(u, v, grid);
  CHECK(ok.precondition_ok);
  CHECK(ok.ordered);
  CHECK(ok.worst_gap == doctest::Approx(-0.2).epsilon(1e-12));

  // Semilinear pair under the same driver: the monotone step keeps order.
  Generator decay = Generator::decay();
  CandidateProcess bu = candidate_semilinear("bu", terminal_value(), decay);
  CandidateProcess bv = candidate_semilinear("bv", bumped, decay);
  ComparisonReport bsde = comparison_check(bu, bv, grid);
  CHECK(bsde.precondition_ok);
  CHECK(bsde.ordered);
  CHECK(bsde.worst_gap <= 1e-12);

  // Interior tamper with equal leaves: the precondition holds but the
  // comparison itself fails, pointing at an interior node.
  auto tampered_table = [inner = v.table](const ScenarioTree& tr, const PathPoint& at) {
    NodeTable<double> t = inner(tr, at);
    for (int l = 0; l < t.depth(); ++l)
      for (double& val : t.level(l)) val += 0.5;
    return t;
  };
  CandidateProcess tampered{"v_plus_interior", tampered_table};
  ComparisonReport interior = comparison_check(tampered, v, grid);
  CHECK(interior.precondition_ok);
  CHECK(!interior.ordered);
  CHECK(interior.worst_gap == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(interior.witness_level < 12);

  // Uniform shift: the terminal precondition itself fails and the interior
  // is left unjudged.
  auto shifted_table = [inner = v.table](const ScenarioTree& tr, const PathPoint& at) {
    NodeTable<double> t = inner(tr, at);
    for (int l = 0; l <= t.depth(); ++l)
      for (double& val : t.level(l)) val += 0.1;
    return t;
  };
  CandidateProcess shifted{"v_plus", shifted_table};
  ComparisonReport pre = comparison_check(shifted, v, grid);
  CHECK(!pre.precondition_ok);
  CHECK(!pre.ordered);
  CHECK(pre.witness_level == 12);
  CHECK(pre.worst_terminal_gap == doctest::Approx(0.1).epsilon(1e-12));

  // A wider tolerance turns the interior violation into an accepted order.
  CHECK(comparison_check(tampered, v, grid, 0.6).ordered);
}

TEST_CASE("worst case drift value field solves its own equation") {
  const double L = 0.5;
  TimeGrid grid(1.0, 16);
  ScenarioTree tree(grid);
  Generator hjb = Generator::drift_hjb(L);
  DriftBound bound(L);
  Localization win{10.0, 4};
  JetSearch search = JetSearch::defaults();

  CandidateProcess value = candidate_from_field(
      "drift_value", [L](const PathPoint& pt) { return pt.current() + L * (1.0 - pt.t()); });

  for (const PathPoint& at : {PathPoint::origin(grid), node_point(tree, 5, 22)}) {
    // The natural jet matches the field up to a constant: tangent both ways.
    Jet natural{-L, 1.0, 0.0};
    TangencyReport sub = tangency_in_mean(value, at, natural, win, bound, Side::sub, hjb);
    TangencyReport sup = tangency_in_mean(value, at, natural, win, bound, Side::super, hjb);
    CHECK(std::abs(sub.gap) <= 1e-13);
    CHECK(std::abs(sup.gap) <= 1e-13);
    CHECK(sub.verdict == Tangency::from_above);
    CHECK(sup.verdict == Tangency::from_below);
    CHECK(std::abs(sub.generator_value) <= 1e-15);  // L - L * |1|

    CHECK(subsolution_check(value, hjb, at, search, win, bound).verdict == Verdict::pass);
    CHECK(supersolution_check(value, hjb, at, search, win, bound).verdict == Verdict::pass);
  }

  // Tilt it and the super side collapses, detected under the same driver.
  CandidateProcess tilted = candidate_tilted(value, 1.0);
  CheckReport broken = supersolution_check(
      tilted, hjb, PathPoint::origin(grid), search, win, bound);
  CHECK(broken.verdict == Verdict::fail);
  CHECK(broken.worst_margin >= 0.9);
  CHECK(subsolution_check(tilted, hjb, PathPoint::origin(grid), search, win, bound).verdict ==
        Verdict::pass);
}

TEST_CASE("checks are byte stable across thread budgets") {
  TimeGrid grid(1.0, 16);
  ScenarioTree tree(grid);
  Localization win{10.0, 4};
  Generator heat = Generator::heat();
  DriftBound bound(0.25);
  CandidateProcess u = candidate_martingale("square", terminal_square());
  PathPoint at = node_point(tree, 3, 5);
  JetSearch search = JetSearch::defaults();

  setenv("PPDE_THREADS", "1", 1);
  CheckReport serial = subsolution_check(u, heat, at, search, win, bound);
  MartingaleReport mart_serial = regular_submartingale_check(u, at, bound);
  setenv("PPDE_THREADS", "8", 1);
  CheckReport wide = subsolution_check(u, heat, at, search, win, bound);
  MartingaleReport mart_wide = regular_submartingale_check(u, at, bound);
  unsetenv("PPDE_THREADS");

  CHECK(serial.verdict == wide.verdict);
  CHECK(serial.tested == wide.tested);
  CHECK(serial.tangent == wide.tangent);
  CHECK(serial.worst_margin == wide.worst_margin);
  REQUIRE(serial.witnesses.size() == wide.witnesses.size());
  for (std::size_t k = 0; k < serial.witnesses.size(); ++k) {
    CHECK(serial.witnesses[k].margin == wide.witnesses[k].margin);
    CHECK(serial.witnesses[k].gap == wide.witnesses[k].gap);
    CHECK(serial.witnesses[k].jet.time_slope == wide.witnesses[k].jet.time_slope);
  }
  CHECK(mart_serial.gap == mart_wide.gap);
  CHECK(mart_serial.envelope == mart_wide.envelope);
}
