#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "vitray/dataset.hpp"
#include "vitray/image_io.hpp"
#include "vitray/rng.hpp"
#include "testutil.hpp"

using namespace vitray;

TEST_CASE("normalize maps /255 exactly and monotonically") {
    GrayImage img = make_gray(1, 3);
    img.pixels = {255, 0, 128};
    ImageTensor t = normalize(img);
    CHECK(t.channels == 1);
    CHECK(t.values[0] == 1.0);
    CHECK(t.values[1] == 0.0);
    CHECK(t.values[2] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));

    for (int a = 0; a < 255; ++a) {
        GrayImage two = make_gray(1, 2);
        two.pixels = {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(a + 1)};
        ImageTensor tt = normalize(two);
        CHECK(tt.values[0] <= tt.values[1]);
    }
}

TEST_CASE("replicate_channels copies the plane losslessly") {
    GrayImage img = make_gray(4, 4, 128);
    ImageTensor one = normalize(img);
    ImageTensor three = replicate_channels(one);
    CHECK(three.channels == 3);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(extract_channel(three, c) == one);
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(three.at(c, i, j) == one.at(0, i, j));
            }
        }
    }
    CHECK_THROWS_AS(replicate_channels(three), ContractError);
}

TEST_CASE("replicate round trip is bitwise over random images") {
    SplitMix64 rng(99);
    for (int iter = 0; iter < 20; ++iter) {
        GrayImage img = make_gray(8, 8);
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_below(256));
        ImageTensor one = normalize(img);
        ImageTensor three = replicate_channels(one);
        for (std::size_t c = 0; c < 3; ++c) CHECK(extract_channel(three, c) == one);
    }
}

TEST_CASE("resize_bilinear") {
    SUBCASE("same size is the identity") {
        SplitMix64 rng(4);
        GrayImage img = make_gray(7, 5);
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_below(256));
        CHECK(resize_bilinear(img, 7, 5) == img);
    }
    SUBCASE("constants stay constant at any size") {
        GrayImage img = make_gray(3, 3, 77);
        for (auto [h, w] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 5}, {9, 4}}) {
            GrayImage out = resize_bilinear(img, h, w);
            for (auto p : out.pixels) CHECK(p == 77);
        }
    }
    SUBCASE("2x2 collapses to the center mean") {
        GrayImage img = make_gray(2, 2);
        img.pixels = {0, 100, 200, 100};
        GrayImage out = resize_bilinear(img, 1, 1);
        CHECK(out.pixels[0] == 100);
    }
    SUBCASE("output never leaves the input range") {
        SplitMix64 rng(6);
        GrayImage img = make_gray(5, 6);
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_below(256));
        auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
        GrayImage out = resize_bilinear(img, 13, 3);
        for (auto p : out.pixels) {
            CHECK(p >= *lo);
            CHECK(p <= *hi);
        }
    }
    SUBCASE("zero target dimension is rejected") {
        GrayImage img = make_gray(2, 2);
        CHECK_THROWS_AS(resize_bilinear(img, 0, 2), ContractError);
    }
}

TEST_CASE("luminance of standard colors") {
    CHECK(luminance(255, 255, 255) == 255);
    CHECK(luminance(0, 0, 0) == 0);
    CHECK(luminance(255, 0, 0) == 76); // round(0.299 * 255)
    CHECK(luminance(0, 255, 0) == 150);
    CHECK(luminance(0, 0, 255) == 29);
}

TEST_CASE("png write/read round trip") {
    testutil::TempDir tmp("png");
    SplitMix64 rng(12);
    GrayImage img = make_gray(9, 13);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_below(256));
    auto path = tmp.path() / "img.png";
    save_png(img, path);
    CHECK(load_image(path) == img);

    GrayImage flat = make_gray(4, 4, 200);
    auto flat_path = tmp.path() / "flat.png";
    save_png(flat, flat_path);
    GrayImage back = load_image(flat_path);
    for (auto p : back.pixels) CHECK(p == 200);
}

TEST_CASE("load_image error paths") {
    testutil::TempDir tmp("io");
    CHECK_THROWS_AS(load_image(tmp.path() / "missing.png"), IoError);
    auto junk = tmp.path() / "junk.png";
    std::ofstream(junk) << "this is not an image";
    CHECK_THROWS_WITH_AS(load_image(junk), doctest::Contains("junk.png"), FormatError);
}

TEST_CASE("split_dataset partitions deterministically") {
    SplitIndices split = split_dataset(4200, 0.8, 1);
    CHECK(split.train.size() == 3360);
    CHECK(split.test.size() == 840);

    for (std::uint64_t seed : {0ull, 7ull, 123ull}) {
        SplitIndices s = split_dataset(10, 0.8, seed);
        CHECK(s.train.size() == 8);
        std::set<std::size_t> all(s.train.begin(), s.train.end());
        all.insert(s.test.begin(), s.test.end());
        CHECK(all.size() == 10);
        CHECK(*all.begin() == 0);
        CHECK(*all.rbegin() == 9);

        SplitIndices again = split_dataset(10, 0.8, seed);
        CHECK(again.train == s.train);
        CHECK(again.test == s.test);
    }

    // Shenzhen-style 90:10.
    SplitIndices shenzhen = split_dataset(662, 0.9, 3);
    CHECK(shenzhen.train.size() == 595);
    CHECK(shenzhen.test.size() == 67);

    // Exact-boundary ratios floor to the mathematical value.
    CHECK(split_dataset(10, 0.7, 0).train.size() == 7);

    std::size_t distinct = 0;
    SplitIndices base = split_dataset(50, 0.8, 0);
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        if (split_dataset(50, 0.8, seed).train != base.train) ++distinct;
    }
    CHECK(distinct == 100);

    CHECK_THROWS_AS(split_dataset(10, 0.0, 0), ContractError);
    CHECK_THROWS_AS(split_dataset(10, 1.0, 0), ContractError);
    CHECK_THROWS_AS(split_dataset(0, 0.5, 0), ContractError);
}

TEST_CASE("make_batches chunks consecutively") {
    std::vector<std::size_t> idx(840);
    std::iota(idx.begin(), idx.end(), 0);
    auto batches = make_batches(idx, 32);
    CHECK(batches.size() == 27);
    CHECK(batches.back().size() == 8);

    std::vector<std::size_t> small(32);
    CHECK(make_batches(small, 32).size() == 1);

    std::vector<std::size_t> five(5);
    auto b5 = make_batches(five, 2);
    REQUIRE(b5.size() == 3);
    CHECK(b5[0].size() == 2);
    CHECK(b5[1].size() == 2);
    CHECK(b5[2].size() == 1);

    CHECK_THROWS_AS(make_batches(five, 0), ContractError);
}

TEST_CASE("synthetic generator properties") {
    LabeledDataset ds = generate_synthetic(32, 32, 32, 42);
    CHECK(ds.size() == 64);
    std::size_t ones = 0;
    for (const auto& s : ds.samples) ones += static_cast<std::size_t>(s.label);
    CHECK(ones == 32);
    for (const auto& s : ds.samples) {
        CHECK(s.image.channels == 3);
        CHECK(s.image.height == 32);
        CHECK(s.image.width == 32);
    }

    for (std::uint64_t seed : {1ull, 5ull, 42ull, 99ull}) {
        auto images = generate_synthetic_images(8, 24, 24, seed);
        double mean0 = 0.0, mean1 = 0.0;
        for (const auto& [img, label] : images) {
            double m = 0.0;
            for (auto p : img.pixels) m += p;
            m /= static_cast<double>(img.pixels.size());
            (label == 0 ? mean0 : mean1) += m;
        }
        CHECK(mean1 / 8.0 > mean0 / 8.0);
    }

    LabeledDataset again = generate_synthetic(32, 32, 32, 42);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(again.samples[i].image == ds.samples[i].image);
        CHECK(again.samples[i].label == ds.samples[i].label);
    }
    LabeledDataset other = generate_synthetic(32, 32, 32, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!(other.samples[i].image == ds.samples[i].image)) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("directory dataset loads sorted, skips junk, errors when empty") {
    testutil::TempDir tmp("ds");
    auto root = tmp.path();
    std::filesystem::create_directories(root / "Normal");
    std::filesystem::create_directories(root / "Abnormal");
    for (int i = 0; i < 3; ++i) {
        GrayImage img = make_gray(16, 16, static_cast<std::uint8_t>(40 + i));
        save_png(img, root / "Normal" / ("n" + std::to_string(i) + ".png"));
    }
    for (int i = 0; i < 2; ++i) {
        GrayImage img = make_gray(16, 16, static_cast<std::uint8_t>(200 + i));
        save_png(img, root / "Abnormal" / ("a" + std::to_string(i) + ".png"));
    }

    LabeledDataset ds = load_directory_dataset(root, 16);
    REQUIRE(ds.size() == 5);
    std::vector<int> labels;
    for (const auto& s : ds.samples) labels.push_back(s.label);
    CHECK(labels == std::vector<int>{0, 0, 0, 1, 1});
    for (const auto& s : ds.samples) {
        CHECK(s.image.channels == 3);
        CHECK(s.image.height == 16);
        CHECK(s.image.width == 16);
    }

    // An undecodable file is skipped with a warning, not an error.
    std::ofstream(root / "Normal" / "broken.png") << "nope";
    LabeledDataset with_junk = load_directory_dataset(root, 16);
    CHECK(with_junk.size() == 5);

    testutil::TempDir empty("empty");
    CHECK_THROWS_AS(load_directory_dataset(empty.path(), 16), ContractError);
    std::filesystem::create_directories(empty.path() / "Normal");
    CHECK_THROWS_AS(load_directory_dataset(empty.path(), 16), Error);
}

TEST_CASE("resize layers into the pipeline") {
    testutil::TempDir tmp("resize");
    std::filesystem::create_directories(tmp.path() / "Normal");
    GrayImage img = make_gray(32, 32, 90);
    save_png(img, tmp.path() / "Normal" / "img.png");
    std::filesystem::create_directories(tmp.path() / "Abnormal");
    save_png(make_gray(8, 8, 10), tmp.path() / "Abnormal" / "img.png");
    LabeledDataset ds = load_directory_dataset(tmp.path(), 16);
    REQUIRE(ds.size() == 2);
    for (const auto& s : ds.samples) {
        CHECK(s.image.height == 16);
        CHECK(s.image.width == 16);
    }
    CHECK(ds.samples[0].image.at(0, 3, 3) == doctest::Approx(90.0 / 255.0));
}

TEST_CASE("optional standardization shifts the range") {
    testutil::TempDir tmp("std");
    std::filesystem::create_directories(tmp.path() / "Normal");
    save_png(make_gray(8, 8, 255), tmp.path() / "Normal" / "white.png");
    LabeledDataset plain = load_directory_dataset(tmp.path(), 8, {"Normal", "Abnormal"}, false);
    LabeledDataset standardized =
        load_directory_dataset(tmp.path(), 8, {"Normal", "Abnormal"}, true);
    CHECK(plain.samples[0].image.at(0, 0, 0) == 1.0);
    // (1.0 - 0.5) / 0.5
    CHECK(standardized.samples[0].image.at(0, 0, 0) == doctest::Approx(1.0));
    save_png(make_gray(8, 8, 0), tmp.path() / "Normal" / "black.png");
    LabeledDataset std2 = load_directory_dataset(tmp.path(), 8, {"Normal", "Abnormal"}, true);
    CHECK(std2.samples[0].image.at(0, 0, 0) == doctest::Approx(-1.0));
}
