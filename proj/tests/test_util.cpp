#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "carve/error.hpp"
#include "carve/hash.hpp"
#include "carve/optim.hpp"
#include "carve/parallel.hpp"
#include "carve/rng.hpp"
#include "carve/toml.hpp"

using namespace carve;

TEST_CASE("rng: same seed reproduces the same stream") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: different seeds diverge") {
    Rng a(1), b(2);
    int equal = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++equal;
    CHECK(equal < 4);
}

TEST_CASE("rng: uniform stays in [0,1) and covers the range") {
    Rng r(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("rng: bounded helpers respect their bounds") {
    Rng r(99);
    for (int i = 0; i < 1000; ++i) {
        CHECK(r.below(17) < 17u);
        const double x = r.uniform(-2.0, 5.0);
        CHECK(x >= -2.0);
        CHECK(x < 5.0);
    }
}

TEST_CASE("rng: normal draws have roughly unit moments") {
    Rng r(5);
    const int n = 20000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("rng: derive gives reproducible independent substreams") {
    Rng base(42);
    Rng s1 = base.derive("fit");
    Rng s2 = base.derive("fit");
    Rng s3 = base.derive("sculpt");
    // Same tag from the same state: identical stream.
    for (int i = 0; i < 16; ++i) CHECK(s1.next_u64() == s2.next_u64());
    // Different tag: a different stream.
    Rng s1b = base.derive("fit");
    int equal = 0;
    for (int i = 0; i < 16; ++i)
        if (s1b.next_u64() == s3.next_u64()) ++equal;
    CHECK(equal < 2);
    // derive is const: the base stream is unaffected by deriving.
    Rng untouched(42);
    CHECK(base.next_u64() == untouched.next_u64());
}

TEST_CASE("hash: fnv1a64 matches known vectors") {
    // FNV-1a 64-bit offset basis for empty input.
    CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ULL);
    // Published FNV-1a test vector.
    CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
    CHECK(hex64(0x5ULL) == "0000000000000005");
}

TEST_CASE("hash: hash_file hashes the file bytes") {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / "carve_hash_test.bin";
    {
        std::ofstream out(p, std::ios::binary);
        out << "hello hash";
    }
    const std::string want = hex64(fnv1a64("hello hash", 10));
    CHECK(hash_file(p.string()) == want);
    fs::remove(p);
    CHECK_THROWS_AS(hash_file(p.string()), io_error);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Adam opt(3, {});
    std::vector<double> params = {1.0, -2.0, 0.5};
    const std::vector<double> grad = {0.0, 0.0, 0.0};
    const std::vector<double> before = params;
    opt.step(params, grad);
    CHECK(params == before);
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adam: first step magnitude is close to the learning rate") {
    AdamConfig cfg;
    cfg.lr = 0.01;
    Adam opt(1, cfg);
    std::vector<double> params = {0.0};
    opt.step(params, {0.5});
    // Bias-corrected first step is lr * g / (|g| + eps).
    CHECK(params[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(std::abs(params[0]) <= 0.01);
}

TEST_CASE("adam: joint update equals per-tensor updates") {
    AdamConfig cfg;
    cfg.lr = 0.003;
    Adam joint(4, cfg), left(2, cfg), right(2, cfg);
    std::vector<double> pj = {0.1, -0.2, 0.3, -0.4};
    std::vector<double> pl = {0.1, -0.2}, pr = {0.3, -0.4};
    Rng rng(11);
    for (int it = 0; it < 25; ++it) {
        std::vector<double> g(4);
        for (auto& v : g) v = rng.uniform(-1.0, 1.0);
        joint.step(pj, g);
        left.step(pl, {g[0], g[1]});
        right.step(pr, {g[2], g[3]});
    }
    CHECK(pj[0] == pl[0]);
    CHECK(pj[1] == pl[1]);
    CHECK(pj[2] == pr[0]);
    CHECK(pj[3] == pr[1]);
}

TEST_CASE("adam: free-function step matches the class") {
    AdamConfig cfg;
    cfg.lr = 0.02;
    Adam opt(2, cfg);
    std::vector<double> p1 = {1.0, 2.0}, p2 = {1.0, 2.0};
    std::vector<double> m(2, 0.0), v(2, 0.0);
    for (int t = 1; t <= 5; ++t) {
        const std::vector<double> g = {0.3 * t, -0.7};
        opt.step(p1, g);
        adam_step(cfg, t, p2, g, m, v);
    }
    CHECK(p1[0] == p2[0]);
    CHECK(p1[1] == p2[1]);
}

TEST_CASE("adam: descends a convex quadratic") {
    AdamConfig cfg;
    cfg.lr = 0.05;
    Adam opt(2, cfg);
    std::vector<double> p = {3.0, -2.0};
    for (int it = 0; it < 400; ++it) {
        const std::vector<double> g = {2.0 * p[0], 2.0 * p[1]};
        opt.step(p, g);
    }
    CHECK(std::abs(p[0]) < 1e-2);
    CHECK(std::abs(p[1]) < 1e-2);
}

TEST_CASE("parallel: block_sum matches the serial variant bit for bit") {
    const int n = 100001;
    std::vector<double> terms(n);
    Rng rng(3);
    for (auto& t : terms) t = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-3.0, 3.0));
    auto term = [&](int i) { return terms[i]; };
    const double parallel = par::block_sum(n, term);
    const double serial = par::block_sum_serial(n, term);
    CHECK(parallel == serial);

    // And across thread counts.
    const int saved = par::max_threads();
    par::set_max_threads(1);
    const double one_thread = par::block_sum(n, term);
    par::set_max_threads(saved);
    CHECK(one_thread == parallel);

    // Against a long-double reference it is an accurate sum.
    long double ref = 0;
    for (double t : terms) ref += t;
    CHECK(parallel == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
}

TEST_CASE("parallel: for_each visits every index exactly once") {
    const int n = 4096 * 3 + 17;
    std::vector<int> hits(n, 0);
    par::for_each(n, [&](int i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));

    std::vector<int> hits2(n, 0);
    par::for_each_serial(n, [&](int i) { hits2[i] += 1; });
    CHECK(std::all_of(hits2.begin(), hits2.end(), [](int h) { return h == 1; }));
}

TEST_CASE("parallel: disabling parallelism does not change results") {
    const int n = 50000;
    auto term = [](int i) { return std::sin(0.001 * i); };
    const double with = par::block_sum(n, term);
    par::set_enabled(false);
    const double without = par::block_sum(n, term);
    par::set_enabled(true);
    CHECK(with == without);
}

TEST_CASE("toml: parses sections, scalars and arrays") {
    const std::string text =
        "# a comment\n"
        "seed = 17\n"
        "out_dir = \"result\"\n"
        "\n"
        "[fit]\n"
        "resolution = 64  # trailing comment\n"
        "lr = 0.01\n"
        "sigma = 5e-2\n"
        "enabled = true\n"
        "names = [\"a\", \"b\", \"c\"]\n";
    const toml::Table t = toml::parse_string(text, "test.toml");
    CHECK(t.get_uint("seed", 0) == 17u);
    CHECK(t.get_string("out_dir", "") == "result");
    CHECK(t.get_int("fit.resolution", 0) == 64);
    CHECK(t.get_double("fit.lr", 0) == doctest::Approx(0.01));
    CHECK(t.get_double("fit.sigma", 0) == doctest::Approx(0.05));
    CHECK(t.get_bool("fit.enabled", false));
    const auto names = t.get_string_array("fit.names");
    REQUIRE(names.size() == 3);
    CHECK(names[0] == "a");
    CHECK(names[2] == "c");
    CHECK_FALSE(t.has("fit.missing"));
    CHECK(t.get_int("fit.missing", -5) == -5);
}

TEST_CASE("toml: get_double accepts integers, get_uint rejects negatives") {
    const toml::Table t = toml::parse_string("x = 3\ny = -2\n", "t");
    CHECK(t.get_double("x", 0) == 3.0);
    CHECK_THROWS_AS(t.get_uint("y", 0), io_error);
}

TEST_CASE("toml: type mismatch names the key") {
    const toml::Table t = toml::parse_string("x = \"hello\"\n", "t");
    try {
        t.get_int("x", 0);
        FAIL("expected io_error");
    } catch (const io_error& e) {
        CHECK(std::string(e.what()).find("x") != std::string::npos);
    }
}

TEST_CASE("toml: parse errors carry source name and line number") {
    try {
        toml::parse_string("ok = 1\nbroken line\n", "cfg.toml");
        FAIL("expected io_error");
    } catch (const io_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("cfg.toml") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }
}

TEST_CASE("toml: duplicate keys are rejected") {
    CHECK_THROWS_AS(toml::parse_string("a = 1\na = 2\n", "t"), io_error);
    CHECK_THROWS_AS(toml::parse_string("[s]\na = 1\na = 2\n", "t"), io_error);
}

TEST_CASE("toml: keys() lists every parsed key sorted") {
    const toml::Table t =
        toml::parse_string("b = 1\na = 2\n[z]\nc = 3\n", "t");
    const auto keys = t.keys();
    REQUIRE(keys.size() == 3);
    CHECK(keys[0] == "a");
    CHECK(keys[1] == "b");
    CHECK(keys[2] == "z.c");
}

TEST_CASE("toml: parse_file reads from disk and reports missing files") {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / "carve_toml_test.toml";
    {
        std::ofstream out(p);
        out << "alpha = 1.5\n";
    }
    const toml::Table t = toml::parse_file(p.string());
    CHECK(t.get_double("alpha", 0) == doctest::Approx(1.5));
    fs::remove(p);
    CHECK_THROWS_AS(toml::parse_file(p.string()), io_error);
}
