#include <doctest.h>

#include "oracles.hpp"
#include "valpat/memory.hpp"

using namespace valpat;

namespace {

Matrix unit_rows(std::initializer_list<std::pair<Scalar, Scalar>> points) {
  Matrix m(static_cast<Index>(points.size()), 2);
  Index r = 0;
  for (const auto& [x, y] : points) {
    m.row(r++) << x, y;
  }
  for (Index i = 0; i < m.rows(); ++i) m.row(i) /= m.row(i).norm();
  return m;
}

}  // namespace

TEST_SUITE("memory") {

TEST_CASE("FIFO eviction: oldest entries go first") {
  NegativeQueue<Scalar> queue(4, 2);
  const Matrix abcd = unit_rows({{1, 0}, {0, 1}, {-1, 0}, {0, -1}});
  queue.enqueue(abcd);
  REQUIRE(queue.filled() == 4);

  const Matrix ef = unit_rows({{1, 1}, {1, -1}});
  queue.enqueue(ef);

  const Matrix snap = queue.snapshot();
  REQUIRE(snap.rows() == 4);
  // oldest-first: c, d, e, f
  CHECK((snap.row(0) - abcd.row(2)).norm() == 0.0);
  CHECK((snap.row(1) - abcd.row(3)).norm() == 0.0);
  CHECK((snap.row(2) - ef.row(0)).norm() == 0.0);
  CHECK((snap.row(3) - ef.row(1)).norm() == 0.0);
}

TEST_CASE("filling an empty queue with B=K rows") {
  NegativeQueue<Scalar> queue(4, 2);
  queue.enqueue(unit_rows({{1, 0}, {0, 1}, {-1, 0}, {0, -1}}));
  CHECK(queue.filled() == 4);
  CHECK(queue.write_ptr() == 0);
}

TEST_CASE("oversized batches and non-unit rows are rejected") {
  NegativeQueue<Scalar> queue(2, 2);
  CHECK_THROWS_AS(queue.enqueue(unit_rows({{1, 0}, {0, 1}, {1, 1}})), Error);

  Matrix bad(1, 2);
  bad << 0.5, 0.0;
  CHECK_THROWS_AS(queue.enqueue(bad), Error);
}

TEST_CASE("snapshot is a detached copy") {
  NegativeQueue<Scalar> queue(3, 2);
  CHECK(queue.snapshot().rows() == 0);  // empty queue -> 0 x D

  queue.enqueue(unit_rows({{1, 0}}));
  const Matrix before = queue.snapshot();
  queue.enqueue(unit_rows({{0, 1}, {-1, 0}, {0, -1}}));
  CHECK(before.rows() == 1);
  CHECK(before(0, 0) == 1.0);
}

TEST_CASE("replay oracle over randomized enqueue sequences") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const Index capacity = rng.uniform_int(1, 12);
    const Index dim = rng.uniform_int(1, 6);
    NegativeQueue<Scalar> queue(capacity, dim);
    std::vector<Matrix> log;
    const int n_batches = static_cast<int>(rng.uniform_int(1, 10));
    for (int b = 0; b < n_batches; ++b) {
      const Index rows = rng.uniform_int(1, capacity);
      const Matrix batch = oracle::random_unit_rows(rows, dim, rng);
      queue.enqueue(batch);
      log.push_back(batch);

      const Matrix expected = oracle::queue_replay(log, capacity);
      const Matrix actual = queue.snapshot();
      REQUIRE(actual.rows() == expected.rows());
      CHECK((actual - expected).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

}  // TEST_SUITE
