#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "elc/errors.hpp"
#include "elc/model_codec.hpp"
#include "elc/network.hpp"
#include "support/test_util.hpp"

using namespace elc;
using namespace elc::codec;
using namespace elc::net;

namespace {

// Entropy oracle via sorted run counting, no hash maps involved.
double entropy_oracle(std::vector<int32_t> s) {
    std::sort(s.begin(), s.end());
    double h = 0.0, n = double(s.size());
    size_t i = 0;
    while (i < s.size()) {
        size_t j = i;
        while (j < s.size() && s[j] == s[i]) ++j;
        double p = double(j - i) / n;
        h -= p * std::log2(p);
        i = j;
    }
    return h;
}

QuantizedModel fuzz_model(std::mt19937_64& rng, int spread) {
    QuantizedModel m = zero_model(NetworkConfig::standard());
    for (auto& l : m.layers) {
        for (auto& w : l.wq) w = int32_t(testutil::irand(rng, 2 * spread + 1)) - spread;
        for (auto& b : l.bias) b = float(testutil::urand(rng, -0.5, 0.5));
        l.gain = float(testutil::urand(rng, 0.5, 1.5));
        l.offset = float(testutil::urand(rng, -0.1, 0.1));
    }
    return m;
}

bool models_bit_equal(const QuantizedModel& a, const QuantizedModel& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (size_t li = 0; li < a.layers.size(); ++li) {
        if (a.layers[li].wq != b.layers[li].wq) return false;
        if (a.layers[li].bias.size() != b.layers[li].bias.size()) return false;
        if (!a.layers[li].bias.empty() &&
            std::memcmp(a.layers[li].bias.data(), b.layers[li].bias.data(),
                        a.layers[li].bias.size() * 4) != 0)
            return false;
        if (std::memcmp(&a.layers[li].gain, &b.layers[li].gain, 4) != 0) return false;
        if (std::memcmp(&a.layers[li].offset, &b.layers[li].offset, 4) != 0) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("diff and add invert each other") {
    NetworkConfig cfg = NetworkConfig::standard();
    QuantizedModel init = zero_model(cfg);
    {
        auto r = diff(init, init);
        CHECK(r.size() == 40224);
        CHECK(std::all_of(r.begin(), r.end(), [](int32_t v) { return v == 0; }));
    }
    {
        QuantizedModel a = init, b = init;
        a.layers[0].wq[0] = 1;
        a.layers[0].wq[1] = -2;
        b.layers[0].wq[0] = 3;
        b.layers[0].wq[1] = -2;
        auto r = diff(b, a);
        CHECK(r[0] == 2);
        CHECK(r[1] == 0);
    }
    std::mt19937_64 rng(1);
    for (int t = 0; t < 10; ++t) {
        QuantizedModel a = fuzz_model(rng, 40);
        QuantizedModel b = fuzz_model(rng, 40);
        QuantizedModel back = add(a, diff(b, a));
        for (size_t li = 0; li < a.layers.size(); ++li)
            CHECK(back.layers[li].wq == b.layers[li].wq);
    }
}

TEST_CASE("diff rejects mismatched architectures") {
    QuantizedModel a = zero_model(NetworkConfig::standard());
    NetworkConfig small;
    small.layers = {{4, 1, 3, true}, {1, 4, 3, false}};
    QuantizedModel b = zero_model(small);
    CHECK_THROWS_AS(diff(a, b), ConfigError);
    CHECK_THROWS_AS(add(a, std::vector<int32_t>(5, 0)), DecodeError);
}

TEST_CASE("empirical entropy matches hand values and the oracle") {
    CHECK(empirical_entropy(std::vector<int32_t>(100, 7)) == 0.0);
    std::vector<int32_t> fair;
    for (int i = 0; i < 64; ++i) fair.push_back(i % 2);
    CHECK(empirical_entropy(fair) == doctest::Approx(1.0).epsilon(1e-12));

    // 1/4 vs 3/4 split: H = 2 - 0.75*log2(3).
    std::vector<int32_t> skew;
    for (int i = 0; i < 100; ++i) skew.push_back(i < 25 ? 0 : 1);
    double expected = 2.0 - 0.75 * std::log2(3.0);
    CHECK(empirical_entropy(skew) == doctest::Approx(expected).epsilon(1e-12));

    std::mt19937_64 rng(2);
    std::vector<int32_t> s(5000);
    for (auto& v : s) v = int32_t(testutil::irand(rng, 19)) - 9;
    CHECK(empirical_entropy(s) == doctest::Approx(entropy_oracle(s)).epsilon(1e-12));

    CHECK_THROWS_AS(empirical_entropy(std::vector<int32_t>{}), NumericError);
}

TEST_CASE("serialize and deserialize reproduce the model bit-exactly") {
    std::mt19937_64 rng(3);
    QuantizedModel init = fuzz_model(rng, 10);
    for (int t = 0; t < 25; ++t) {
        QuantizedModel cur = fuzz_model(rng, t % 3 == 0 ? 3 : 60);
        auto bytes = serialize_el(cur, init);
        QuantizedModel back = deserialize_el(bytes, init);
        CHECK(models_bit_equal(back, cur));
    }
}

TEST_CASE("identical checkpoint codes to a near-empty residue") {
    std::mt19937_64 rng(4);
    QuantizedModel init = fuzz_model(rng, 10);
    auto bytes = serialize_el(init, init);
    // Header + size fields + tiny coded block + raw blocks.
    CHECK(bytes.size() < kElHeaderBytes + 12 + 100 + 1348 + 176);
    CHECK(models_bit_equal(deserialize_el(bytes, init), init));

    ElHeader h = parse_el_header(bytes);
    CHECK(h.present);
    CHECK(!h.reference);
}

TEST_CASE("biases block occupies exactly 1348 bytes for the standard table") {
    std::mt19937_64 rng(5);
    QuantizedModel init = fuzz_model(rng, 10);
    QuantizedModel cur = fuzz_model(rng, 10);
    auto bytes = serialize_el(cur, init);
    uint32_t coded_len = uint32_t(bytes[20]) | uint32_t(bytes[21]) << 8 |
                         uint32_t(bytes[22]) << 16 | uint32_t(bytes[23]) << 24;
    size_t affine_bytes = 22 * 8;
    size_t biases_bytes = bytes.size() - kElHeaderBytes - 12 - coded_len - affine_bytes;
    CHECK(biases_bytes == 1348);
}

TEST_CASE("empty stream variant is a bare 12-byte header") {
    auto bytes = serialize_no_el();
    CHECK(bytes.size() == kElHeaderBytes);
    ElHeader h = parse_el_header(bytes);
    CHECK(!h.present);
    CHECK(!h.reference);
    QuantizedModel init = zero_model(NetworkConfig::standard());
    CHECK_THROWS_AS(deserialize_el(bytes, init), DecodeError);
}

TEST_CASE("every single-byte corruption is rejected") {
    std::mt19937_64 rng(6);
    QuantizedModel init = fuzz_model(rng, 5);
    QuantizedModel cur = fuzz_model(rng, 5);
    auto bytes = serialize_el(cur, init);
    for (size_t i = 0; i < bytes.size(); ++i) {
        auto bad = bytes;
        bad[i] ^= 0xFF;
        CHECK_THROWS_AS(deserialize_el(bad, init), DecodeError);
    }
    auto longer = bytes;
    longer.push_back(0);
    CHECK_THROWS_AS(deserialize_el(longer, init), DecodeError);
    auto shorter = bytes;
    shorter.pop_back();
    CHECK_THROWS_AS(deserialize_el(shorter, init), DecodeError);
    CHECK_THROWS_AS(deserialize_el(std::vector<uint8_t>{}, init), DecodeError);
}

TEST_CASE("decoding against a mismatched initial model is rejected") {
    std::mt19937_64 rng(7);
    QuantizedModel init = fuzz_model(rng, 5);
    QuantizedModel cur = fuzz_model(rng, 5);
    auto bytes = serialize_el(cur, init);

    NetworkConfig small;
    small.layers = {{4, 1, 3, true}, {1, 4, 3, false}};
    QuantizedModel other = zero_model(small);
    CHECK_THROWS_AS(deserialize_el(bytes, other), DecodeError);
}

TEST_CASE("initial model container round-trips with the reference flag") {
    std::mt19937_64 rng(8);
    NetworkConfig cfg = NetworkConfig::standard();
    QuantizedModel init = fuzz_model(rng, 8);
    auto bytes = serialize_initial(init);
    ElHeader h = parse_el_header(bytes);
    CHECK(h.present);
    CHECK(h.reference);
    QuantizedModel back = deserialize_initial(bytes, cfg);
    CHECK(models_bit_equal(back, init));

    // A plain checkpoint stream must not pass as an initial model.
    auto plain = serialize_el(init, zero_model(cfg));
    CHECK_THROWS_AS(deserialize_initial(plain, cfg), DecodeError);
}

TEST_CASE("rate accounting always sums to the file size") {
    std::mt19937_64 rng(9);
    QuantizedModel init = fuzz_model(rng, 10);
    QuantizedModel cur = fuzz_model(rng, 10);
    auto bytes = serialize_el(cur, init);
    ElAccounting a = accounting(cur, bytes.size());
    CHECK(a.r_model_bits == uint64_t(bytes.size()) * 8);
    CHECK(a.r_biases_bits == 337 * 32);
    CHECK(a.r_affine_bits == 22 * 2 * 32);
    CHECK(a.r_res_bits + a.r_biases_bits + a.r_affine_bits == a.r_model_bits);
}

TEST_CASE("original-model rate counts every parameter at 32 bits") {
    QuantizedModel m = zero_model(NetworkConfig::standard());
    CHECK(r_ori_bits(m) == uint64_t(40224 + 337 + 44) * 32);
}

TEST_CASE("compression ratio arithmetic") {
    CHECK(compression_ratio(1000.0, 1000.0) == 1.0);
    CHECK_THROWS_AS(compression_ratio(1000.0, 0.0), NumericError);

    // A residue entropy of 2.31 bits against 32-bit floats implies ~13.85x.
    CHECK(32.0 / 2.31 == doctest::Approx(13.85).epsilon(1e-3));

    // Coding the initial model against itself: all-zero residue.
    std::mt19937_64 rng(10);
    QuantizedModel init = fuzz_model(rng, 10);
    auto bytes = serialize_el(init, init);
    double ratio = compression_ratio(double(r_ori_bits(init)), double(bytes.size()) * 8.0);
    CHECK(ratio > 50.0);
}
