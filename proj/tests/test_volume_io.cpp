#include <gtest/gtest.h>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "lesioneval/rng.hpp"
#include "lesioneval/volume_io.hpp"

namespace fs = std::filesystem;
using namespace lesioneval;

namespace {

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / ("lesioneval_io_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

template <class T>
void put(std::vector<std::uint8_t>& b, std::size_t at, T v) {
    std::memcpy(b.data() + at, &v, sizeof v);
}

// Hand-built single-file header with dim=(3,2,2,2), pixdim=(1,0.5,0.5,1.0), uint8.
std::vector<std::uint8_t> minimal_header() {
    std::vector<std::uint8_t> b(352 + 8, 0);
    put<std::int32_t>(b, 0, 348);
    const std::int16_t dim[8] = {3, 2, 2, 2, 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) put(b, 40 + 2 * i, dim[i]);
    put<std::int16_t>(b, 70, 2);
    put<std::int16_t>(b, 72, 8);
    const float pix[4] = {1.0F, 0.5F, 0.5F, 1.0F};
    for (int i = 0; i < 4; ++i) put(b, 76 + 4 * i, pix[i]);
    put<float>(b, 108, 352.0F);
    std::memcpy(b.data() + 344, "n+1\0", 4);
    for (int i = 0; i < 8; ++i) b[352 + i] = 1;
    return b;
}

Volume random_volume(VolumeKind kind, std::uint64_t seed) {
    Xoshiro256 g(seed);
    Grid grid{{g.below(6) + 1, g.below(6) + 1, g.below(6) + 1}, {0.5 + g.unit(), 0.25 + g.unit(), 1.0 + 2 * g.unit()}};
    std::vector<float> data(grid.size());
    for (auto& v : data) {
        switch (kind) {
            case VolumeKind::binary: v = static_cast<float>(g.below(2)); break;
            case VolumeKind::probability: v = static_cast<float>(g.unit()); break;
            case VolumeKind::labels: v = static_cast<float>(g.below(40000)); break;
        }
    }
    return Volume(grid, kind, data);
}

}  // namespace

TEST(Nifti, MinimalHeader) {
    const auto v = parse_nifti(minimal_header());
    EXPECT_EQ(v.dims(), (Dims{2, 2, 2}));
    EXPECT_EQ(v.spacing(), (Spacing{0.5, 0.5, 1.0}));
    EXPECT_EQ(v.kind(), VolumeKind::binary);
    EXPECT_EQ(v.count_foreground(), 8U);
}

TEST(Nifti, ByteSwappedHeader) {
    auto b = minimal_header();
    const auto swap = [&](std::size_t at, std::size_t n) { std::reverse(b.begin() + at, b.begin() + at + n); };
    swap(0, 4);
    for (int i = 0; i < 8; ++i) swap(40 + 2 * i, 2);
    swap(70, 2);
    swap(72, 2);
    for (int i = 0; i < 8; ++i) swap(76 + 4 * i, 4);
    swap(108, 4);
    const auto v = parse_nifti(b);
    EXPECT_EQ(v.dims(), (Dims{2, 2, 2}));
    EXPECT_EQ(v.spacing(), (Spacing{0.5, 0.5, 1.0}));
}

TEST(Nifti, HeaderErrors) {
    auto b = minimal_header();
    put<std::int16_t>(b, 70, 64);  // float64
    put<std::int16_t>(b, 72, 64);
    EXPECT_THROW(parse_nifti(b), UnsupportedError);

    b = minimal_header();
    put<float>(b, 80, 0.0F);
    EXPECT_THROW(parse_nifti(b), FormatError);

    b = minimal_header();
    put<float>(b, 80, -0.5F);
    std::vector<std::string> warnings;
    EXPECT_EQ(parse_nifti(b, &warnings).spacing()[0], 0.5);
    EXPECT_EQ(warnings.size(), 1U);

    b = minimal_header();
    put<std::int16_t>(b, 40, 4);
    put<std::int16_t>(b, 48, 3);
    EXPECT_THROW(parse_nifti(b), UnsupportedError);

    b = minimal_header();
    std::memcpy(b.data() + 344, "ni1\0", 4);
    EXPECT_THROW(parse_nifti(b), UnsupportedError);

    b = minimal_header();
    b.resize(355);
    EXPECT_THROW(parse_nifti(b), FormatError);
}

TEST(Nifti, CorruptInputsNeverCrash) {
    const auto good = minimal_header();
    Xoshiro256 g(99);
    for (int trial = 0; trial < 3000; ++trial) {
        auto b = good;
        if (trial % 3 == 0) b.resize(g.below(b.size()));
        const auto flips = 1 + g.below(6);
        for (std::uint64_t k = 0; k < flips && !b.empty(); ++k) b[g.below(b.size())] = static_cast<std::uint8_t>(g.next());
        try {
            const auto v = parse_nifti(b);
            EXPECT_EQ(v.size(), v.grid().size());
        } catch (const lesioneval::Error&) {
        }
    }
}

TEST(Nifti, RoundTripAllKinds) {
    const auto dir = temp_dir();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (auto kind : {VolumeKind::binary, VolumeKind::probability, VolumeKind::labels}) {
            const auto v = random_volume(kind, seed);
            for (const char* name : {"v.nii", "v.nii.gz"}) {
                write_nifti(v, dir / name);
                const auto back = read_nifti(dir / name);
                EXPECT_EQ(back.dims(), v.dims());
                EXPECT_EQ(back.kind(), v.kind());
                for (int a = 0; a < 3; ++a) EXPECT_EQ(back.spacing()[a], static_cast<double>(static_cast<float>(v.spacing()[a])));
                EXPECT_TRUE(std::equal(back.data().begin(), back.data().end(), v.data().begin()));
            }
        }
    }
    const Volume p(Grid{{3, 1, 1}}, VolumeKind::probability, {0.0F, 0.25F, 1.0F});
    write_nifti(p, dir / "p.nii.gz");
    EXPECT_EQ(read_nifti(dir / "p.nii.gz"), p);
}

TEST(Nifti, ThirdPartyFixture) {
    const fs::path data = LESIONEVAL_TEST_DATA;
    std::ifstream in(data / "nibabel_reference.json");
    const auto ref = nlohmann::json::parse(in);
    for (const auto& [key, file] : {std::pair{"prob", "nibabel_prob.nii.gz"}, std::pair{"mask", "nibabel_mask.nii"}}) {
        const auto v = read_volume(data / file);
        const auto& r = ref.at(key);
        for (int a = 0; a < 3; ++a) {
            EXPECT_EQ(v.dims()[a], r.at("dims")[a].get<std::size_t>());
            EXPECT_NEAR(v.spacing()[a], r.at("spacing")[a].get<double>(), 1e-6);
        }
        const auto& values = r.at("values");
        ASSERT_EQ(values.size(), v.size());
        for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], values[i].get<float>()) << key << " voxel " << i;
    }
    EXPECT_EQ(read_volume(data / "nibabel_mask.nii").kind(), VolumeKind::binary);
    EXPECT_EQ(read_volume(data / "nibabel_prob.nii.gz").kind(), VolumeKind::probability);
}

TEST(Raw, ZerosAndErrors) {
    const auto dir = temp_dir();
    const std::string meta = R"({"dims":[2,2,2],"spacing_mm":[1,1,1],"dtype":"u8","order":"x-fastest"})";
    write_text(dir / "z.raw.json", meta);
    write_bytes(dir / "z.raw", std::vector<std::uint8_t>(8, 0));
    const auto v = read_raw(dir / "z.raw", dir / "z.raw.json");
    EXPECT_EQ(v.kind(), VolumeKind::binary);
    EXPECT_EQ(v.count_foreground(), 0U);

    write_bytes(dir / "short.raw", std::vector<std::uint8_t>(7, 0));
    EXPECT_THROW(read_raw(dir / "short.raw", dir / "z.raw.json"), FormatError);

    write_text(dir / "missing.json", R"({"dims":[2,2,2],"dtype":"u8","order":"x-fastest"})");
    EXPECT_THROW(read_raw(dir / "z.raw", dir / "missing.json"), FormatError);

    std::vector<std::uint8_t> f(8 * 4, 0);
    const float big = 1.5F;
    std::memcpy(f.data() + 4, &big, 4);
    write_bytes(dir / "f.raw", f);
    write_text(dir / "f.json",
               R"({"dims":[2,2,2],"spacing_mm":[1,1,1],"dtype":"f32","order":"x-fastest","kind":"probability"})");
    EXPECT_THROW(read_raw(dir / "f.raw", dir / "f.json"), FormatError);
}

TEST(Raw, RoundTrip) {
    const auto dir = temp_dir();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        for (auto kind : {VolumeKind::binary, VolumeKind::probability, VolumeKind::labels}) {
            const auto v = random_volume(kind, seed + 100);
            write_volume(v, dir / "r.bin", VolumeFormat::raw);
            EXPECT_EQ(read_volume(dir / "r.bin"), v);
        }
    }
}

TEST(Io, MissingFileIsIoError) { EXPECT_THROW(read_volume("/nonexistent/x.nii.gz"), IoError); }

TEST(Io, LargeVolumeUnderOneSecond) {
    const auto dir = temp_dir();
    const Grid grid{{192, 192, 96}, {0.5, 0.5, 1.5}};
    std::vector<float> data(grid.size(), 0.0F);
    for (std::size_t i = 0; i < data.size(); i += 37) data[i] = 1.0F;
    const Volume v(grid, VolumeKind::binary, data);
    const auto t0 = std::chrono::steady_clock::now();
    write_nifti(v, dir / "big.nii.gz");
    const auto back = read_nifti(dir / "big.nii.gz");
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(back, v);
    EXPECT_LT(s, 1.0);
}
