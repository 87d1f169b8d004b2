#include <doctest.h>

#include <cmath>
#include <set>

#include "toll/rng.hpp"

using toll::Rng;

TEST_CASE("same seed gives identical streams") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(123), d(123);
    for (int i = 0; i < 1000; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("uniform mean within 4 sigma of 0.5") {
    Rng rng(7);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rng.uniform();
    const double mean = sum / n;
    const double sigma = std::sqrt(1.0 / 12.0 / n);
    CHECK(std::fabs(mean - 0.5) < 4.0 * sigma);
}

TEST_CASE("normal moments are sane") {
    Rng rng(11);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(std::fabs(s / n) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("permutations of 5 cover all 120 orders") {
    Rng rng(3);
    std::set<std::vector<int>> seen;
    for (int i = 0; i < 100000 && seen.size() < 120; ++i) seen.insert(rng.permutation(5));
    CHECK(seen.size() == 120);
}

TEST_CASE("forked streams are independent of parent consumption") {
    Rng a(99);
    Rng fork_before = a.fork(1, 2);
    a.next_u64();
    a.next_u64();
    // fork depends only on seed state at fork time, so re-fork from a fresh
    // copy matches.
    Rng b(99);
    Rng fork_again = b.fork(1, 2);
    for (int i = 0; i < 100; ++i) CHECK(fork_before.next_u64() == fork_again.next_u64());
    // distinct tags give distinct streams
    Rng c(99);
    CHECK(c.fork(1, 2).next_u64() != c.fork(1, 3).next_u64());
}
