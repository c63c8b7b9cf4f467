#include "sphseg/nifti.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace sphseg::nifti {

namespace {

constexpr std::size_t kHeaderSize = 348;

// Offsets per the header layout table in nifti.hpp.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffSrowY = 296;
constexpr std::size_t kOffSrowZ = 312;
constexpr std::size_t kOffMagic = 344;

template <typename T>
T swap_bytes(T v) {
    auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
}

template <typename T>
T read_le(const std::uint8_t* p, bool swapped) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return swapped ? swap_bytes(v) : v;
}

template <typename T>
void write_le(std::vector<std::uint8_t>& out, std::size_t offset, T v) {
    std::memcpy(out.data() + offset, &v, sizeof(T));
}

bool is_gzip(const std::vector<std::uint8_t>& bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

double decode_value(const std::uint8_t* p, DataType dt, bool swapped) {
    switch (dt) {
        case DataType::Uint8:
            return double(*p);
        case DataType::Int16:
            return double(read_le<std::int16_t>(p, swapped));
        case DataType::Float32:
            return double(read_le<float>(p, swapped));
        case DataType::Float64:
            return read_le<double>(p, swapped);
    }
    throw UnsupportedDatatypeError("unreachable datatype");
}

} // namespace

int bitpix_for(DataType dt) {
    switch (dt) {
        case DataType::Uint8: return 8;
        case DataType::Int16: return 16;
        case DataType::Float32: return 32;
        case DataType::Float64: return 64;
    }
    throw UnsupportedDatatypeError("unknown datatype code");
}

NiftiImage read_nifti(const std::vector<std::uint8_t>& bytes) {
    const std::vector<std::uint8_t> raw = is_gzip(bytes) ? gzip_decompress(bytes) : bytes;

    if (raw.size() < kHeaderSize)
        throw TruncationError("file shorter than the 348-byte NIfTI-1 header");

    const std::uint8_t* p = raw.data();

    bool swapped = false;
    std::int32_t sizeof_hdr = read_le<std::int32_t>(p, false);
    if (sizeof_hdr != 348) {
        if (swap_bytes(sizeof_hdr) == 348)
            swapped = true;
        else
            throw FormatError("sizeof_hdr is not 348 in either byte order; not a NIfTI-1 file");
    }

    NiftiHeader hdr;
    hdr.sizeof_hdr = 348;
    std::memcpy(hdr.magic.data(), p + kOffMagic, 4);
    if (!(hdr.magic[0] == 'n' && hdr.magic[1] == '+' && hdr.magic[2] == '1' && hdr.magic[3] == '\0'))
        throw FormatError("bad magic; expected single-file NIfTI-1 magic \"n+1\"");

    for (int i = 0; i < 8; ++i)
        hdr.dim[i] = read_le<std::int16_t>(p + kOffDim + 2 * i, swapped);
    hdr.datatype_code = read_le<std::int16_t>(p + kOffDatatype, swapped);
    hdr.bitpix = read_le<std::int16_t>(p + kOffBitpix, swapped);
    for (int i = 0; i < 8; ++i)
        hdr.pixdim[i] = read_le<float>(p + kOffPixdim + 4 * i, swapped);
    hdr.vox_offset = read_le<float>(p + kOffVoxOffset, swapped);
    hdr.scl_slope = read_le<float>(p + kOffSclSlope, swapped);
    hdr.scl_inter = read_le<float>(p + kOffSclInter, swapped);
    hdr.qform_code = read_le<std::int16_t>(p + kOffQformCode, swapped);
    hdr.sform_code = read_le<std::int16_t>(p + kOffSformCode, swapped);
    for (int i = 0; i < 4; ++i) {
        hdr.srow_x[i] = read_le<float>(p + kOffSrowX + 4 * i, swapped);
        hdr.srow_y[i] = read_le<float>(p + kOffSrowY + 4 * i, swapped);
        hdr.srow_z[i] = read_le<float>(p + kOffSrowZ + 4 * i, swapped);
    }

    if (hdr.dim[0] != 3)
        throw UnsupportedShapeError("dim[0] = " + std::to_string(hdr.dim[0]) +
                                    "; only 3D volumes are supported");
    if (hdr.dim[1] < 1 || hdr.dim[2] < 1 || hdr.dim[3] < 1)
        throw UnsupportedShapeError("dim[1..3] must all be >= 1");

    DataType dt;
    switch (hdr.datatype_code) {
        case 2: dt = DataType::Uint8; break;
        case 4: dt = DataType::Int16; break;
        case 16: dt = DataType::Float32; break;
        case 64: dt = DataType::Float64; break;
        default:
            throw UnsupportedDatatypeError("datatype code " + std::to_string(hdr.datatype_code) +
                                           " not supported (need 2, 4, 16 or 64)");
    }
    if (hdr.bitpix != bitpix_for(dt))
        throw FormatError("bitpix " + std::to_string(hdr.bitpix) + " inconsistent with datatype");

    if (!(hdr.vox_offset >= 348.0f))
        throw FormatError("vox_offset must be >= 348");

    NiftiImage img;
    img.header = hdr;
    img.dims = Dims3{std::size_t(hdr.dim[1]), std::size_t(hdr.dim[2]), std::size_t(hdr.dim[3])};
    img.spacing = Spacing3{double(hdr.pixdim[1]), double(hdr.pixdim[2]), double(hdr.pixdim[3])};

    const std::size_t offset = std::size_t(hdr.vox_offset);
    const std::size_t elem = std::size_t(bitpix_for(dt)) / 8;
    const std::size_t n = img.dims.count();
    if (raw.size() < offset || raw.size() - offset < n * elem)
        throw TruncationError("data section truncated: need " + std::to_string(n * elem) +
                              " bytes at offset " + std::to_string(offset));

    const bool scale = hdr.scl_slope != 0.0f &&
                       !(hdr.scl_slope == 1.0f && hdr.scl_inter == 0.0f);
    img.data.resize(n);
    const std::uint8_t* src = raw.data() + offset;
    for (std::size_t i = 0; i < n; ++i) {
        double v = decode_value(src + i * elem, dt, swapped);
        if (scale)
            v = v * double(hdr.scl_slope) + double(hdr.scl_inter);
        img.data[i] = v;
    }
    return img;
}

Volume3D to_volume(const NiftiImage& img) {
    return Volume3D(img.dims, img.spacing, img.data);
}

LabelVolume to_label_volume(const NiftiImage& img) {
    std::vector<std::uint8_t> labels(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = img.data[i];
        if (!(v == 0.0 || v == 1.0 || v == 2.0 || v == 4.0))
            throw std::invalid_argument("voxel value " + std::to_string(v) +
                                        " is not a valid segmentation label {0,1,2,4}");
        labels[i] = std::uint8_t(v);
    }
    return LabelVolume(img.dims, img.spacing, std::move(labels));
}

namespace {

void encode_value(std::vector<std::uint8_t>& out, std::size_t offset, double v, DataType dt) {
    switch (dt) {
        case DataType::Uint8: {
            if (v < 0.0 || v > 255.0 || v != std::floor(v))
                throw RangeError("value " + std::to_string(v) + " not representable as uint8");
            out[offset] = std::uint8_t(v);
            return;
        }
        case DataType::Int16: {
            if (v < -32768.0 || v > 32767.0 || v != std::floor(v))
                throw RangeError("value " + std::to_string(v) + " not representable as int16");
            write_le(out, offset, std::int16_t(v));
            return;
        }
        case DataType::Float32: {
            write_le(out, offset, float(v));
            return;
        }
        case DataType::Float64: {
            write_le(out, offset, v);
            return;
        }
    }
}

std::vector<std::uint8_t> write_raw(Dims3 dims, Spacing3 spacing,
                                    const double* values, std::size_t n, DataType dt) {
    // Canonical writer: little-endian, vox_offset 352 (348-byte header plus a
    // 4-byte zero extension flag), slope/inter 1/0, diagonal sform.
    const std::size_t elem = std::size_t(bitpix_for(dt)) / 8;
    std::vector<std::uint8_t> out(352 + n * elem, 0);

    write_le<std::int32_t>(out, 0, 348);
    const std::array<std::int16_t, 8> dim = {3, std::int16_t(dims.nx), std::int16_t(dims.ny),
                                             std::int16_t(dims.nz), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i)
        write_le(out, kOffDim + 2 * i, dim[i]);
    write_le(out, kOffDatatype, std::int16_t(dt));
    write_le(out, kOffBitpix, std::int16_t(bitpix_for(dt)));
    const std::array<float, 8> pixdim = {1.0f, float(spacing.sx), float(spacing.sy),
                                         float(spacing.sz), 0, 0, 0, 0};
    for (int i = 0; i < 8; ++i)
        write_le(out, kOffPixdim + 4 * i, pixdim[i]);
    write_le(out, kOffVoxOffset, 352.0f);
    write_le(out, kOffSclSlope, 1.0f);
    write_le(out, kOffSclInter, 0.0f);
    write_le(out, kOffQformCode, std::int16_t(0));
    write_le(out, kOffSformCode, std::int16_t(1));
    write_le(out, kOffSrowX + 0, float(spacing.sx));
    write_le(out, kOffSrowY + 4, float(spacing.sy));
    write_le(out, kOffSrowZ + 8, float(spacing.sz));
    out[kOffMagic + 0] = 'n';
    out[kOffMagic + 1] = '+';
    out[kOffMagic + 2] = '1';
    out[kOffMagic + 3] = '\0';

    for (std::size_t i = 0; i < n; ++i)
        encode_value(out, 352 + i * elem, values[i], dt);
    return out;
}

} // namespace

std::vector<std::uint8_t> write_nifti(const Volume3D& vol, DataType dt, bool gzip) {
    if (vol.dims().nx > 32767 || vol.dims().ny > 32767 || vol.dims().nz > 32767)
        throw RangeError("dims exceed the int16 range of the NIfTI-1 dim field");
    auto raw = write_raw(vol.dims(), vol.spacing(), vol.data().data(), vol.data().size(), dt);
    return gzip ? gzip_compress(raw) : raw;
}

std::vector<std::uint8_t> write_nifti(const LabelVolume& vol, bool gzip) {
    if (vol.dims().nx > 32767 || vol.dims().ny > 32767 || vol.dims().nz > 32767)
        throw RangeError("dims exceed the int16 range of the NIfTI-1 dim field");
    std::vector<double> widened(vol.labels().begin(), vol.labels().end());
    auto raw = write_raw(vol.dims(), vol.spacing(), widened.data(), widened.size(), DataType::Uint8);
    return gzip ? gzip_compress(raw) : raw;
}

namespace {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string() + " for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("error while reading " + path.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out)
        throw IoError("error while writing " + path.string());
}

bool wants_gzip(const std::filesystem::path& path) {
    return path.extension() == ".gz";
}

} // namespace

Volume3D read_volume_file(const std::filesystem::path& path) {
    return to_volume(read_nifti(read_file_bytes(path)));
}

LabelVolume read_label_file(const std::filesystem::path& path) {
    return to_label_volume(read_nifti(read_file_bytes(path)));
}

void write_volume_file(const std::filesystem::path& path, const Volume3D& vol, DataType dt) {
    write_file_bytes(path, write_nifti(vol, dt, wants_gzip(path)));
}

void write_label_file(const std::filesystem::path& path, const LabelVolume& vol) {
    write_file_bytes(path, write_nifti(vol, wants_gzip(path)));
}

std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& raw) {
    z_stream zs{};
    // windowBits 15+16 selects the gzip (RFC 1952) container.
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("deflateInit2 failed");

    std::vector<std::uint8_t> out;
    out.resize(deflateBound(&zs, uLong(raw.size())));
    zs.next_in = const_cast<Bytef*>(raw.data());
    zs.avail_in = uInt(raw.size());
    zs.next_out = out.data();
    zs.avail_out = uInt(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END)
        throw IoError("gzip compression failed (zlib rc " + std::to_string(rc) + ")");
    out.resize(zs.total_out);
    return out;
}

std::vector<std::uint8_t> gzip_decompress(const std::vector<std::uint8_t>& compressed) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
        throw IoError("inflateInit2 failed");

    std::vector<std::uint8_t> out;
    out.resize(std::max<std::size_t>(compressed.size() * 4, 1 << 16));
    zs.next_in = const_cast<Bytef*>(compressed.data());
    zs.avail_in = uInt(compressed.size());

    int rc = Z_OK;
    std::size_t written = 0;
    while (true) {
        zs.next_out = out.data() + written;
        zs.avail_out = uInt(out.size() - written);
        rc = inflate(&zs, Z_NO_FLUSH);
        written = zs.total_out;
        if (rc == Z_STREAM_END)
            break;
        if (rc == Z_OK || rc == Z_BUF_ERROR) {
            if (zs.avail_out == 0 || rc == Z_BUF_ERROR) {
                if (zs.avail_in == 0 && rc == Z_BUF_ERROR) {
                    inflateEnd(&zs);
                    throw TruncationError("gzip stream ended unexpectedly");
                }
                out.resize(out.size() * 2);
            }
            continue;
        }
        inflateEnd(&zs);
        throw FormatError("gzip decompression failed (zlib rc " + std::to_string(rc) + ")");
    }
    inflateEnd(&zs);
    out.resize(written);
    return out;
}

} // namespace sphseg::nifti
