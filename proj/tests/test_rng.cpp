#include <doctest.h>

#include <cmath>
#include <vector>

#include "ceg/rng.hpp"

using ceg::Rng;

TEST_CASE("same seed reproduces the stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("different seeds give different streams") {
    Rng a(1), b(2);
    int equal = 0;
    for (int i = 0; i < 100; ++i) equal += a.uniform() == b.uniform();
    CHECK(equal < 5);
}

TEST_CASE("split streams are independent of parent draw order") {
    Rng parent(7);
    Rng child_before = parent.split(3);
    parent.uniform();
    parent.normal();
    Rng child_after = parent.split(3);
    for (int i = 0; i < 20; ++i) CHECK(child_before.uniform() == child_after.uniform());
}

TEST_CASE("split2 equals chained split") {
    Rng root(11);
    Rng a = root.split2(4, 9);
    Rng b = root.split(4).split(9);
    for (int i = 0; i < 20; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("distinct split ids give distinct streams") {
    Rng root(5);
    Rng a = root.split(0);
    Rng b = root.split(1);
    int equal = 0;
    for (int i = 0; i < 100; ++i) equal += a.uniform() == b.uniform();
    CHECK(equal < 5);
}

TEST_CASE("uniform stays strictly inside (0, 1)") {
    Rng rng(13);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal moments") {
    Rng rng(17);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("exponential mean matches 1/rate") {
    Rng rng(19);
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.exponential(2.0);
        CHECK(x >= 0.0);
        sum += x;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
}
