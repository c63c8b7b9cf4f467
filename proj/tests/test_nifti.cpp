#include "sphseg/nifti.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cstring>
#include <random>

using namespace sphseg;
using namespace sphseg::nifti;

TEST_SUITE_BEGIN("nifti");

namespace {

// Byte-level fixture assembler, independent of the library writer.
template <typename T>
void poke(std::vector<std::uint8_t>& buf, std::size_t off, T v, bool big_endian = false) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if (big_endian)
        std::reverse(raw, raw + sizeof(T));
    std::memcpy(buf.data() + off, raw, sizeof(T));
}

std::vector<std::uint8_t> make_fixture_f32(bool big_endian) {
    std::vector<std::uint8_t> buf(352 + 8 * 4, 0);
    poke<std::int32_t>(buf, 0, 348, big_endian);
    const std::int16_t dim[8] = {3, 2, 2, 2, 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i)
        poke<std::int16_t>(buf, 40 + 2 * i, dim[i], big_endian);
    poke<std::int16_t>(buf, 70, 16, big_endian); // float32
    poke<std::int16_t>(buf, 72, 32, big_endian);
    const float pixdim[8] = {1.f, 1.5f, 2.f, 2.5f, 0, 0, 0, 0};
    for (int i = 0; i < 8; ++i)
        poke<float>(buf, 76 + 4 * i, pixdim[i], big_endian);
    poke<float>(buf, 108, 352.0f, big_endian);
    poke<float>(buf, 112, 0.0f, big_endian); // slope 0: no scaling
    poke<float>(buf, 116, 0.0f, big_endian);
    buf[344] = 'n';
    buf[345] = '+';
    buf[346] = '1';
    buf[347] = '\0';
    for (int i = 0; i < 8; ++i)
        poke<float>(buf, 352 + 4 * std::size_t(i), float(i), big_endian);
    return buf;
}

} // namespace

TEST_CASE("hand-assembled float32 fixture decodes to values 0..7") {
    const auto img = read_nifti(make_fixture_f32(false));
    CHECK(img.dims == Dims3{2, 2, 2});
    CHECK(img.spacing.sx == doctest::Approx(1.5));
    CHECK(img.spacing.sy == doctest::Approx(2.0));
    CHECK(img.spacing.sz == doctest::Approx(2.5));
    for (int i = 0; i < 8; ++i)
        CHECK(img.data[std::size_t(i)] == double(i));
}

TEST_CASE("gzip wrapping is invisible") {
    const auto raw = make_fixture_f32(false);
    const auto gz = gzip_compress(raw);
    REQUIRE(gz.size() >= 2);
    CHECK(gz[0] == 0x1F);
    CHECK(gz[1] == 0x8B);
    const auto a = read_nifti(raw);
    const auto b = read_nifti(gz);
    CHECK(a.dims == b.dims);
    CHECK(a.data == b.data);
}

TEST_CASE("byte-swapped fixture decodes identically to its little-endian twin") {
    const auto le = read_nifti(make_fixture_f32(false));
    const auto be = read_nifti(make_fixture_f32(true));
    CHECK(le.dims == be.dims);
    CHECK(le.data == be.data);
    CHECK(le.spacing == be.spacing);
}

TEST_CASE("bad magic is a format error") {
    auto buf = make_fixture_f32(false);
    buf[344] = 'n';
    buf[345] = 'i';
    buf[346] = '1';
    CHECK_THROWS_AS(read_nifti(buf), FormatError);
}

TEST_CASE("unsupported datatype and shape are rejected") {
    auto buf = make_fixture_f32(false);
    poke<std::int16_t>(buf, 70, 8); // int32: unsupported
    poke<std::int16_t>(buf, 72, 32);
    CHECK_THROWS_AS(read_nifti(buf), UnsupportedDatatypeError);

    auto buf2 = make_fixture_f32(false);
    poke<std::int16_t>(buf2, 40, 4); // dim[0] = 4
    CHECK_THROWS_AS(read_nifti(buf2), UnsupportedShapeError);
}

TEST_CASE("truncated data section is detected") {
    auto buf = make_fixture_f32(false);
    buf.resize(buf.size() - 5);
    CHECK_THROWS_AS(read_nifti(buf), TruncationError);
}

TEST_CASE("scl_slope scaling is applied when nonzero") {
    auto buf = make_fixture_f32(false);
    poke<float>(buf, 112, 2.0f);
    poke<float>(buf, 116, 10.0f);
    const auto img = read_nifti(buf);
    for (int i = 0; i < 8; ++i)
        CHECK(img.data[std::size_t(i)] == doctest::Approx(2.0 * i + 10.0));
}

TEST_CASE("writer emits documented bytes") {
    LabelVolume seg(Dims3{2, 1, 1}, Spacing3{1, 1, 1}, std::vector<std::uint8_t>{0, 4});
    const auto bytes = write_nifti(seg, false);
    REQUIRE(bytes.size() == 352 + 2);
    // sizeof_hdr little-endian 348
    CHECK(bytes[0] == 0x5C);
    CHECK(bytes[1] == 0x01);
    // datatype uint8 at offset 70, bitpix 8 at 72
    CHECK(bytes[70] == 2);
    CHECK(bytes[72] == 8);
    // magic at 344
    CHECK(bytes[344] == 'n');
    CHECK(bytes[345] == '+');
    CHECK(bytes[346] == '1');
    CHECK(bytes[347] == 0);
    // data bytes at vox_offset 352
    CHECK(bytes[352] == 0x00);
    CHECK(bytes[353] == 0x04);
}

TEST_CASE("uint8 range errors on write") {
    Volume3D vol(Dims3{1, 1, 1}, Spacing3{1, 1, 1}, std::vector<double>{300.0});
    CHECK_THROWS_AS(write_nifti(vol, DataType::Uint8, false), RangeError);
    Volume3D frac(Dims3{1, 1, 1}, Spacing3{1, 1, 1}, std::vector<double>{2.5});
    CHECK_THROWS_AS(write_nifti(frac, DataType::Uint8, false), RangeError);
    CHECK_THROWS_AS(write_nifti(frac, DataType::Int16, false), RangeError);
}

TEST_CASE("label volume round trip is bit identical") {
    std::mt19937_64 rng(31);
    const LabelVolume seg = oracle::random_label_volume(Dims3{5, 4, 3}, Spacing3{1.0, 1.0, 1.25}, rng);
    for (bool gz : {false, true}) {
        const auto img = read_nifti(write_nifti(seg, gz));
        const LabelVolume back = to_label_volume(img);
        CHECK(back.dims() == seg.dims());
        CHECK(back.labels() == seg.labels());
        CHECK(back.spacing().sz == doctest::Approx(1.25));
    }
}

TEST_CASE("round trip across all four datatypes") {
    std::mt19937_64 rng(57);
    std::uniform_int_distribution<int> du8(0, 255);
    std::uniform_int_distribution<int> di16(-32768, 32767);
    std::uniform_real_distribution<float> df(-1000.f, 1000.f);

    const Dims3 dims{3, 4, 2};
    const Spacing3 sp{0.5, 2.0, 1.0};
    for (DataType dt : {DataType::Uint8, DataType::Int16, DataType::Float32, DataType::Float64}) {
        std::vector<double> data(dims.count());
        for (auto& v : data) {
            switch (dt) {
                case DataType::Uint8: v = du8(rng); break;
                case DataType::Int16: v = di16(rng); break;
                case DataType::Float32: v = double(df(rng)); break;
                case DataType::Float64: v = double(df(rng)) * 1.000000001; break;
            }
        }
        const Volume3D vol(dims, sp, data);
        const Volume3D back = to_volume(read_nifti(write_nifti(vol, dt, false)));
        CHECK(back.dims() == dims);
        CHECK(back.data() == vol.data());
    }
}

TEST_SUITE_END();
