#include <doctest.h>

#include <cmath>
#include <vector>

#include <emgwave/features.hpp>
#include <emgwave/signal.hpp>
#include <emgwave/util.hpp>

#include "oracles.hpp"

using namespace emgwave;

namespace {

bool close_rel(double a, double b, double tol = 1e-9) {
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

std::vector<double> random_array(Rng& rng, std::size_t len) {
    std::vector<double> x(len);
    for (double& v : x) v = 6.0 * rng.uniform() - 3.0;
    return x;
}

EmgRecording make_recording(std::vector<std::vector<double>> channels) {
    EmgRecording rec;
    rec.channels = std::move(channels);
    rec.label = 1;
    rec.subject_id = "S1";
    rec.trial_index = 1;
    return rec;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("worked examples evaluate exactly") {
    FeatureParams p;
    CHECK(mav(std::vector<double>{3, -3, 3}) == 3.0);
    CHECK(wl(std::vector<double>{1, 2, 4}) == 3.0);
    CHECK(rms(std::vector<double>(8, 0.0)) == 0.0);
    p.wamp_threshold = 0.1;
    CHECK(conventional_feature(FeatureKind::WAMP, std::vector<double>(5, 2.0), p) == 0.0);
    p.myop_threshold = 0.1;
    CHECK(conventional_feature(FeatureKind::MYOP, std::vector<double>{0.5, 0.01, 0.8}, p) ==
          2.0 / 3.0);

    // linear ramp: constant first difference
    CHECK(iasd(std::vector<double>{0, 1, 2, 3}) == 0.0);
    // quadratic: first differences 1,3,5,7
    CHECK(iasd(std::vector<double>{0, 1, 4, 9, 16}) == 6.0);
    CHECK(iasd(std::vector<double>{0, 1, 0, 1}) == 4.0);

    // quadratic has constant second difference
    CHECK(iatd(std::vector<double>{0, 1, 4, 9, 16}) == 0.0);
    // cubic: second differences 6,12,18
    CHECK(iatd(std::vector<double>{0, 1, 8, 27, 64}) == 12.0);
    CHECK(iatd(std::vector<double>{0, 1, 0, 1}) == 4.0);

    CHECK(ieav(std::vector<double>(5, 0.0)) == 5.0);
    CHECK(ieav(std::vector<double>{1, -1}) == 2.0 * std::exp(1.0));
    CHECK(ieav(std::vector<double>{std::log(2.0)}) == doctest::Approx(2.0).epsilon(1e-15));

    CHECK(ialv(std::vector<double>(4, 0.0), p) == 0.0);  // log(1) = 0 with T = 1
    CHECK(ialv(std::vector<double>{std::exp(1.0) - 1.0}, p) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ialv(std::vector<double>{-5.0}, p) ==
          doctest::Approx(std::fabs(std::log(1e-12))).epsilon(1e-12));

    CHECK(ie(std::vector<double>(3, 0.0)) == 3.0);
    CHECK(ie(std::vector<double>{1, -1}) ==
          doctest::Approx(std::exp(1.0) + std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("IE equals IEAV on non-negative input") {
    Rng rng(23);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> x(16);
        for (double& v : x) v = 3.0 * rng.uniform();
        CHECK(ie(x) == ieav(x));
    }
}

TEST_CASE("length preconditions name the minimum") {
    FeatureParams p;
    CHECK_THROWS_WITH_AS(var(std::vector<double>{1.0}), doctest::Contains("at least 2"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(dvarv(std::vector<double>{1.0, 2.0}), doctest::Contains("at least 3"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(iasd(std::vector<double>{1.0, 2.0}), doctest::Contains("at least 3"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(iatd(std::vector<double>{1.0, 2.0, 3.0}), doctest::Contains("at least 4"),
                         std::invalid_argument);
    CHECK_THROWS_AS(wl(std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(mav(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(compute_feature(FeatureKind::IEMG, std::vector<double>{std::nan("")}, p),
                    std::invalid_argument);
}

TEST_CASE("exp-based features reject overflow-scale input") {
    CHECK_THROWS_WITH_AS(ieav(std::vector<double>{701.0}), doctest::Contains("normalize"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(ieav(std::vector<double>{-701.0}), doctest::Contains("normalize"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(ie(std::vector<double>{701.0}), doctest::Contains("normalize"),
                         std::invalid_argument);
    // IE only amplifies positive samples; very negative input is fine
    CHECK(ie(std::vector<double>{-701.0}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("all 17 features match naive oracles on 1000 random arrays") {
    Rng rng(29);
    for (int rep = 0; rep < 1000; ++rep) {
        std::size_t len = 8 + rng.uniform_index(505);  // 8..512
        std::vector<double> x = random_array(rng, len);
        FeatureParams p;
        p.myop_threshold = rng.uniform();
        p.wamp_threshold = rng.uniform();
        p.ialv_offset = 0.5 + rng.uniform();
        p.ialv_floor = 1e-12;
        for (FeatureKind kind : all_feature_kinds) {
            double got = compute_feature(kind, x, p);
            double want = oracle::naive_feature(kind, x, p);
            CHECK_MESSAGE(close_rel(got, want),
                          feature_name(kind) << " len=" << len << " got=" << got
                                             << " want=" << want);
        }
    }
}

TEST_CASE("linear and quadratic scale behavior") {
    Rng rng(31);
    FeatureParams p;
    p.myop_threshold = 0.3;
    p.wamp_threshold = 0.3;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> x = random_array(rng, 32);
        double a = 0.1 + 3.0 * rng.uniform();
        std::vector<double> ax(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) ax[i] = a * x[i];

        for (FeatureKind kind : {FeatureKind::IEMG, FeatureKind::MAV, FeatureKind::RMS,
                                 FeatureKind::WL, FeatureKind::DAMV, FeatureKind::DASDV})
            CHECK(close_rel(compute_feature(kind, ax, p), a * compute_feature(kind, x, p)));

        for (FeatureKind kind :
             {FeatureKind::SSI, FeatureKind::VAR, FeatureKind::M2, FeatureKind::DVARV})
            CHECK(close_rel(compute_feature(kind, ax, p), a * a * compute_feature(kind, x, p)));

        // MYOP/WAMP are invariant when signal and threshold scale together
        FeatureParams ps;
        ps.myop_threshold = a * p.myop_threshold;
        ps.wamp_threshold = a * p.wamp_threshold;
        CHECK(conventional_feature(FeatureKind::MYOP, ax, ps) ==
              conventional_feature(FeatureKind::MYOP, x, p));
        CHECK(conventional_feature(FeatureKind::WAMP, ax, ps) ==
              conventional_feature(FeatureKind::WAMP, x, p));
    }
}

TEST_CASE("difference-based features are shift invariant") {
    Rng rng(37);
    FeatureParams p;
    p.wamp_threshold = 0.25;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> x = random_array(rng, 24);
        double c = 4.0 * rng.uniform() - 2.0;
        std::vector<double> shifted(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] + c;
        for (FeatureKind kind :
             {FeatureKind::IASD, FeatureKind::IATD, FeatureKind::WL, FeatureKind::DAMV,
              FeatureKind::M2, FeatureKind::DVARV, FeatureKind::DASDV, FeatureKind::WAMP})
            CHECK(std::fabs(compute_feature(kind, shifted, p) - compute_feature(kind, x, p)) <=
                  1e-9 * std::max(1.0, std::fabs(compute_feature(kind, x, p))));
    }
}

TEST_CASE("extract_vector layout: 2 channels, 2 levels, 3 sub-bands") {
    Rng rng(41);
    std::vector<double> ch1(400), ch2(400);
    for (double& v : ch1) v = rng.normal();
    for (double& v : ch2) v = rng.normal();
    EmgRecording rec = make_recording({ch1, ch2});
    Window w{&rec, 0, 400};

    ExtractionOptions opts;
    CHECK(feature_vector_dim(2, opts) == 102);
    std::vector<double> v = extract_vector(w, opts);
    REQUIRE(v.size() == 102);

    auto names = feature_layout_names(2, opts);
    REQUIRE(names.size() == 102);
    CHECK(names.front() == "ch1_D1_IEMG");
    CHECK(names[17] == "ch1_D2_IEMG");
    CHECK(names[34] == "ch1_A2_IEMG");
    CHECK(names[51] == "ch2_D1_IEMG");
    CHECK(names.back() == "ch2_A2_IE");

    // swapping channels swaps the two 51-dim blocks
    EmgRecording swapped = make_recording({ch2, ch1});
    Window ws{&swapped, 0, 400};
    std::vector<double> vs = extract_vector(ws, opts);
    for (std::size_t i = 0; i < 51; ++i) {
        CHECK(vs[i] == v[51 + i]);
        CHECK(vs[51 + i] == v[i]);
    }

    // details_only drops the approximation block
    ExtractionOptions det_only = opts;
    det_only.subbands = SubbandMode::details_only;
    CHECK(feature_vector_dim(2, det_only) == 68);
    CHECK(extract_vector(w, det_only).size() == 68);

    // conventional restriction
    ExtractionOptions conv = opts;
    conv.kinds = conventional_kinds();
    CHECK(feature_vector_dim(2, conv) == 72);
    CHECK(extract_vector(w, conv).size() == 72);

    // restricted kinds must stay in canonical order
    ExtractionOptions bad = opts;
    bad.kinds = {FeatureKind::MAV, FeatureKind::IEMG};
    CHECK_THROWS_AS(extract_vector(w, bad), std::invalid_argument);
}

TEST_CASE("extract_vector on an all-zero window matches closed forms") {
    EmgRecording rec = make_recording(
        {std::vector<double>(400, 0.0), std::vector<double>(400, 0.0)});
    Window w{&rec, 0, 400};
    ExtractionOptions opts;  // ialv_offset 1 => IALV of zeros is 0
    std::vector<double> v = extract_vector(w, opts);
    auto names = feature_layout_names(2, opts);
    // sub-band lengths in layout order: D1=200, D2=100, A2=100 per channel
    std::vector<double> band_len = {200, 100, 100, 200, 100, 100};
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::string_view name = names[i];
        double len = band_len[i / 17];
        if (name.ends_with("_IEAV") || name.ends_with("_IE"))
            CHECK(v[i] == len);
        else
            CHECK(v[i] == 0.0);
    }
}

TEST_CASE("extract_vector is deterministic and errors carry sub-band context") {
    Rng rng(43);
    std::vector<double> ch(400);
    for (double& v : ch) v = rng.normal();
    EmgRecording rec = make_recording({ch});
    Window w{&rec, 0, 400};
    ExtractionOptions opts;
    CHECK(extract_vector(w, opts) == extract_vector(w, opts));

    // 8-sample window at 2 levels: A2 has 2 coefficients, too short for IASD
    EmgRecording tiny = make_recording({std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8}});
    Window wt{&tiny, 0, 8};
    CHECK_THROWS_WITH_AS(extract_vector(wt, opts), doctest::Contains("band D2"),
                         std::invalid_argument);
}

}  // TEST_SUITE
