#include <algorithm>
#include <cmath>
#include <numeric>

#include "cadm/metrics.hpp"
#include "cadm/rng.hpp"
#include "doctest.h"

using namespace cadm;

TEST_CASE("a hand-computed confusion table gives the textbook values") {
  ConfusionCounts c{3, 1, 1, 5};
  Metrics m = metrics_from_counts(c);
  CHECK(m.precision == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(m.recall == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(m.f1 == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(m.iou == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(m.oa == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(c.total() == 10);
}

TEST_CASE("perfect and inverted predictions hit the extremes") {
  Metrics perfect = metrics_from_counts({40, 0, 0, 60});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.iou == 1.0);
  CHECK(perfect.oa == 1.0);

  Metrics wrong = metrics_from_counts({0, 60, 40, 0});
  CHECK(wrong.precision == 0.0);
  CHECK(wrong.recall == 0.0);
  CHECK(wrong.f1 == 0.0);
  CHECK(wrong.iou == 0.0);
  CHECK(wrong.oa == 0.0);
}

TEST_CASE("degenerate denominators resolve to zero, never NaN") {
  // nothing predicted positive, nothing actually positive
  Metrics allneg = metrics_from_counts({0, 0, 0, 100});
  CHECK(allneg.precision == 0.0);
  CHECK(allneg.recall == 0.0);
  CHECK(allneg.f1 == 0.0);
  CHECK(allneg.iou == 0.0);
  CHECK(allneg.oa == 1.0);

  Metrics empty = metrics_from_counts({0, 0, 0, 0});
  CHECK(empty.oa == 0.0);
  CHECK(empty.f1 == 0.0);
  CHECK(std::isfinite(empty.precision));

  // predicted positives exist but no true ones
  Metrics ghost = metrics_from_counts({0, 10, 0, 90});
  CHECK(ghost.precision == 0.0);
  CHECK(ghost.recall == 0.0);
  CHECK(ghost.f1 == 0.0);
  CHECK(ghost.oa == doctest::Approx(0.9));
}

TEST_CASE("identities hold over random tables") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    ConfusionCounts c{
        static_cast<std::uint64_t>(rng.uniform_int(0, 5000)),
        static_cast<std::uint64_t>(rng.uniform_int(0, 5000)),
        static_cast<std::uint64_t>(rng.uniform_int(0, 5000)),
        static_cast<std::uint64_t>(rng.uniform_int(0, 5000))};
    Metrics m = metrics_from_counts(c);
    if (m.precision + m.recall > 0) {
      const double f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
      CHECK(m.f1 == doctest::Approx(f1).epsilon(1e-12));
    }
    if (c.tp + c.fp + c.fn > 0) {
      // IoU and F1 are deterministically linked
      CHECK(m.iou == doctest::Approx(m.f1 / (2.0 - m.f1)).epsilon(1e-12));
      CHECK(m.iou ==
            doctest::Approx(static_cast<double>(c.tp) /
                            static_cast<double>(c.tp + c.fp + c.fn))
                .epsilon(1e-12));
    }
    if (c.total() > 0) {
      CHECK((m.oa == 1.0) == (c.fp + c.fn == 0));
      CHECK(m.oa >= 0.0);
      CHECK(m.oa <= 1.0);
    }
    CHECK(m.f1 >= 0.0);
    CHECK(m.f1 <= 1.0);
    CHECK(m.iou <= m.f1 + 1e-15);  // IoU never exceeds F1
  }
}

TEST_CASE("pixel counting matches a brute-force loop on random grids") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<std::uint8_t> pred(1, 1, 16, 16), gt(1, 1, 16, 16);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
      gt[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
    }
    ConfusionCounts c = confusion(pred, gt);
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == 1 && gt[i] == 1) ++tp;
      if (pred[i] == 1 && gt[i] == 0) ++fp;
      if (pred[i] == 0 && gt[i] == 1) ++fn;
      if (pred[i] == 0 && gt[i] == 0) ++tn;
    }
    CHECK(c.tp == tp);
    CHECK(c.fp == fp);
    CHECK(c.fn == fn);
    CHECK(c.tn == tn);
    CHECK(c.total() == pred.size());
  }
}

TEST_CASE("counting is invariant to pixel order") {
  Rng rng(8);
  Tensor<std::uint8_t> pred(1, 1, 8, 8), gt(1, 1, 8, 8);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
    gt[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
  }
  ConfusionCounts before = confusion(pred, gt);

  std::vector<int> perm(pred.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = static_cast<int>(perm.size()) - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.uniform_int(0, i)]);
  Tensor<std::uint8_t> pred2(1, 1, 8, 8), gt2(1, 1, 8, 8);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    pred2[i] = pred[perm[i]];
    gt2[i] = gt[perm[i]];
  }
  ConfusionCounts after = confusion(pred2, gt2);
  CHECK(before.tp == after.tp);
  CHECK(before.fp == after.fp);
  CHECK(before.fn == after.fn);
  CHECK(before.tn == after.tn);
}

TEST_CASE("confusion rejects non-binary grids and shape mismatches") {
  Tensor<std::uint8_t> a(1, 1, 2, 2), b(1, 1, 2, 2);
  a[0] = 2;
  CHECK_THROWS_AS(confusion(a, b), std::invalid_argument);
  a[0] = 1;
  b[3] = 255;
  CHECK_THROWS_AS(confusion(a, b), std::invalid_argument);
  b[3] = 0;
  Tensor<std::uint8_t> c(1, 1, 2, 3);
  CHECK_THROWS_AS(confusion(a, c), std::invalid_argument);
}

TEST_CASE("counts merge additively for micro-averaging") {
  ConfusionCounts a{1, 2, 3, 4}, b{10, 20, 30, 40};
  a += b;
  CHECK(a.tp == 11);
  CHECK(a.fp == 22);
  CHECK(a.fn == 33);
  CHECK(a.tn == 44);
  CHECK(a.total() == 110);

  // micro-averaged metrics come from the merged counts, not an average of
  // the two metric sets
  Metrics merged = metrics_from_counts(a);
  CHECK(merged.precision == doctest::Approx(11.0 / 33.0).epsilon(1e-15));
}
