#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "advsel/dataset.hpp"
#include "advsel/errors.hpp"
#include "advsel/model.hpp"

using namespace advsel;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> idx_images_fixture() {
    // magic 0x00000803, 2 images of 2x2
    return {0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02,
            0x00, 0x00, 0x00, 0x02, 0,    255,  128,  0,    255,  1,    2,    3};
}

std::vector<std::uint8_t> idx_labels_fixture() {
    // magic 0x00000801, 2 labels
    return {0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 1, 0};
}

void write_csv(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

} // namespace

TEST_CASE("load_idx: handcrafted fixture parses bit-exactly") {
    fs::path images = temp_file("advsel_idx_images.bin");
    fs::path labels = temp_file("advsel_idx_labels.bin");
    write_bytes(images, idx_images_fixture());
    write_bytes(labels, idx_labels_fixture());

    Dataset data = load_idx(images.string(), labels.string());
    REQUIRE(data.size() == 2);
    REQUIRE(data.feature_dim() == 4);
    CHECK(data.features.at(0, 0) == 0.0);
    CHECK(data.features.at(0, 1) == 1.0);
    CHECK(data.features.at(0, 2) == 128.0 / 255.0);
    CHECK(data.features.at(0, 3) == 0.0);
    CHECK(data.features.at(1, 0) == 1.0);
    CHECK(data.features.at(1, 1) == 1.0 / 255.0);
    CHECK(data.labels == std::vector<int>{1, 0});
    CHECK(data.class_count == 2);

    SUBCASE("loading twice yields identical features") {
        Dataset again = load_idx(images.string(), labels.string());
        CHECK(max_abs_diff(again.features, data.features) == 0.0);
    }
    fs::remove(images);
    fs::remove(labels);
}

TEST_CASE("load_idx: wrong magic in either file") {
    fs::path images = temp_file("advsel_idx_images2.bin");
    fs::path labels = temp_file("advsel_idx_labels2.bin");
    // Image magic written into the labels slot and vice versa.
    write_bytes(images, idx_labels_fixture());
    write_bytes(labels, idx_images_fixture());
    try {
        load_idx(images.string(), labels.string());
        FAIL("expected idx_error");
    } catch (const idx_error& e) {
        CHECK(e.which() == idx_error::kind::wrong_magic);
    }

    write_bytes(images, idx_images_fixture());
    try {
        load_idx(images.string(), labels.string());
        FAIL("expected idx_error");
    } catch (const idx_error& e) {
        CHECK(e.which() == idx_error::kind::wrong_magic);
    }
    fs::remove(images);
    fs::remove(labels);
}

TEST_CASE("load_idx: truncated payload") {
    fs::path images = temp_file("advsel_idx_images3.bin");
    fs::path labels = temp_file("advsel_idx_labels3.bin");
    std::vector<std::uint8_t> short_images = idx_images_fixture();
    short_images.resize(short_images.size() - 3);
    write_bytes(images, short_images);
    write_bytes(labels, idx_labels_fixture());
    try {
        load_idx(images.string(), labels.string());
        FAIL("expected idx_error");
    } catch (const idx_error& e) {
        CHECK(e.which() == idx_error::kind::truncated);
    }
    fs::remove(images);
    fs::remove(labels);
}

TEST_CASE("load_idx: image/label count mismatch") {
    fs::path images = temp_file("advsel_idx_images4.bin");
    fs::path labels = temp_file("advsel_idx_labels4.bin");
    std::vector<std::uint8_t> three_labels = {0x00, 0x00, 0x08, 0x01, 0x00, 0x00,
                                              0x00, 0x03, 1,    0,    1};
    write_bytes(images, idx_images_fixture());
    write_bytes(labels, three_labels);
    try {
        load_idx(images.string(), labels.string());
        FAIL("expected idx_error");
    } catch (const idx_error& e) {
        CHECK(e.which() == idx_error::kind::count_mismatch);
    }
    fs::remove(images);
    fs::remove(labels);
}

TEST_CASE("load_csv: min-max normalization per column") {
    fs::path path = temp_file("advsel_data.csv");
    write_csv(path, "a,b,label\n2,7,cat\n4,7,dog\n3,7,cat\n");
    Dataset data = load_csv(path.string(), "label");
    REQUIRE(data.size() == 3);
    REQUIRE(data.feature_dim() == 2);
    CHECK(data.features.at(0, 0) == 0.0);
    CHECK(data.features.at(1, 0) == 1.0);
    CHECK(data.features.at(2, 0) == 0.5);
    // constant column maps to zero
    CHECK(data.features.at(0, 1) == 0.0);
    CHECK(data.features.at(1, 1) == 0.0);
    CHECK(data.labels == std::vector<int>{0, 1, 0}); // first-appearance ids
    CHECK(data.label_names == std::vector<std::string>{"cat", "dog"});
    fs::remove(path);
}

TEST_CASE("load_csv: malformed inputs") {
    fs::path path = temp_file("advsel_bad.csv");
    write_csv(path, "a,label\nx,cat\n");
    CHECK_THROWS_AS(load_csv(path.string(), "label"), value_error);
    write_csv(path, "a,label\n1,cat\n");
    CHECK_THROWS_AS(load_csv(path.string(), "target"), value_error);
    fs::remove(path);
}

TEST_CASE("synth_gaussians: zero sigma pins every sample to its class mean") {
    std::vector<std::vector<double>> means{{0.2, 0.4}, {0.8, 0.6}};
    Dataset data = synth_gaussians(5, 3, 2, means, 0.0);
    REQUIRE(data.size() == 6);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& mean = means[static_cast<std::size_t>(data.labels[i])];
        CHECK(data.features.at(i, 0) == mean[0]);
        CHECK(data.features.at(i, 1) == mean[1]);
    }
}

TEST_CASE("synth_gaussians: deterministic per seed, clamped to the unit box") {
    std::vector<std::vector<double>> means{{0.05, 0.95}, {0.9, 0.1}};
    Dataset a = synth_gaussians(9, 50, 2, means, 0.3);
    Dataset b = synth_gaussians(9, 50, 2, means, 0.3);
    CHECK(max_abs_diff(a.features, b.features) == 0.0);
    for (double v : a.features.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    Dataset c = synth_gaussians(10, 50, 2, means, 0.3);
    CHECK(max_abs_diff(a.features, c.features) > 0.0);
}

TEST_CASE("split: fractions must sum to one") {
    std::vector<std::vector<double>> means{{0.3}, {0.7}};
    Dataset data = synth_gaussians(1, 10, 1, means, 0.05);
    CHECK_THROWS_AS(split(data, SplitFractions{0.5, 0.2, 0.2}, 1), value_error);
}

TEST_CASE("split: disjoint, stratified within one sample per class") {
    std::vector<std::vector<double>> means{{0.2, 0.2}, {0.8, 0.8}};
    Dataset data = synth_gaussians(13, 101, 2, means, 0.1); // odd count stresses rounding
    SplitResult r = split(data, SplitFractions{0.6, 0.2, 0.2}, 17);
    CHECK(r.train.size() + r.validation.size() + r.test.size() == data.size());

    auto histogram = [](const Dataset& d) {
        std::vector<std::size_t> h(d.class_count, 0);
        for (int y : d.labels) h[static_cast<std::size_t>(y)]++;
        return h;
    };
    const Dataset* parts[3] = {&r.train, &r.validation, &r.test};
    double fractions[3] = {0.6, 0.2, 0.2};
    for (int s = 0; s < 3; ++s) {
        auto h = histogram(*parts[s]);
        for (std::size_t c = 0; c < 2; ++c) {
            double expected = fractions[s] * 101.0;
            CHECK(std::fabs(static_cast<double>(h[c]) - expected) <= 1.0);
        }
    }

    SUBCASE("same seed reproduces the same split") {
        SplitResult again = split(data, SplitFractions{0.6, 0.2, 0.2}, 17);
        CHECK(max_abs_diff(again.train.features, r.train.features) == 0.0);
        CHECK(again.test.labels == r.test.labels);
    }
}

TEST_CASE("dataset cache: round-trip is bit-identical") {
    fs::path path = temp_file("advsel_cache.bin");
    std::vector<std::vector<double>> means{{0.25, 0.5, 0.75}, {0.75, 0.5, 0.25}};
    Dataset data = synth_gaussians(23, 20, 3, means, 0.12);
    data.label_names = {"neg", "pos"};
    save_dataset(data, path.string());
    Dataset loaded = load_dataset(path.string());
    CHECK(max_abs_diff(loaded.features, data.features) == 0.0);
    CHECK(loaded.labels == data.labels);
    CHECK(loaded.class_count == data.class_count);
    CHECK(loaded.label_names == data.label_names);
    fs::remove(path);

    CHECK_THROWS_AS(load_dataset(path.string()), io_error);
}

TEST_CASE("end to end: well-separated blobs train to perfect accuracy") {
    std::vector<std::vector<double>> means{{0.2, 0.2, 0.2, 0.2}, {0.8, 0.8, 0.8, 0.8}};
    Dataset data = synth_gaussians(29, 60, 4, means, 0.05);
    Model model = init_model({4, 2}, 30);
    std::vector<double> ones(data.size(), 1.0);
    for (int step = 0; step < 150; ++step) {
        model = sgd_step(model, param_grad(model, data.features, data.labels, ones), 0.5);
    }
    std::vector<int> preds = predict_classes(forward(model, data.features));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (preds[i] == data.labels[i]) ++correct;
    }
    CHECK(correct == data.size());
}
