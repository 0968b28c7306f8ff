#pragma once

// Minimal NIfTI-1 single-file (.nii / .nii.gz) reader and writer, plus a raw
// voxel dump described by a JSON sidecar:
//
//   { "dims": [nx, ny, nz], "spacing_mm": [sx, sy, sz],
//     "dtype": "u8" | "f32", "order": "x-fastest", "kind": "binary" }
//
// "kind" is optional; when absent the kind is inferred from the values.
// Orientation (qform/sform) is ignored: every metric here works in voxel
// index space scaled by spacing.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "volume.hpp"

namespace lesioneval {

enum class VolumeFormat { nifti, raw };

namespace io_detail {

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::int16_t kDtUint8 = 2;
inline constexpr std::int16_t kDtInt16 = 4;
inline constexpr std::int16_t kDtFloat32 = 16;

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline bool is_gzip(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

inline std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> in) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw FormatError("zlib init failed");
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> chunk{};
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (true) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
        if (rc == Z_STREAM_END) {
            // Concatenated gzip members.
            if (zs.avail_in == 0) break;
            if (inflateReset(&zs) != Z_OK) break;
            continue;
        }
        if (rc != Z_OK) break;
        if (zs.avail_in == 0 && zs.avail_out != 0) break;
    }
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw FormatError("truncated or corrupt gzip stream");
    return out;
}

inline std::vector<std::uint8_t> gzip(std::span<const std::uint8_t> in) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw IoError("zlib init failed");
    }
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())) + 32);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw IoError("gzip compression failed");
    return out;
}

template <typename T>
T load(std::span<const std::uint8_t> bytes, std::size_t offset, bool swap) {
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes.data() + offset, sizeof(T));
    if (swap) std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
}

template <typename T>
void store(std::vector<std::uint8_t>& bytes, std::size_t offset, T value) {
    const auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    std::memcpy(bytes.data() + offset, raw.data(), sizeof(T));
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline std::optional<VolumeKind> kind_from_name(std::string_view name) {
    if (name == "binary") return VolumeKind::binary;
    if (name == "probability") return VolumeKind::probability;
    if (name == "labels") return VolumeKind::labels;
    return std::nullopt;
}

/// Builds a Volume, inferring the kind unless one is declared; any violation
/// becomes a FormatError so callers see a file problem.
inline Volume make_volume(const Grid& grid, std::vector<float> values, std::optional<VolumeKind> declared) {
    try {
        const VolumeKind kind = declared ? *declared : Volume::infer_kind(values);
        return Volume(grid, kind, std::move(values));
    } catch (const ValueError& e) {
        throw FormatError(e.what());
    }
}

}  // namespace io_detail

/// Parses an in-memory NIfTI-1 image (optionally gzip-compressed).
/// Negative pixdim values are made positive; a note is appended to
/// `warnings` when one is supplied.
inline Volume parse_nifti(std::span<const std::uint8_t> file_bytes, std::vector<std::string>* warnings = nullptr) {
    using namespace io_detail;
    std::vector<std::uint8_t> inflated;
    std::span<const std::uint8_t> bytes = file_bytes;
    if (is_gzip(bytes)) {
        inflated = gunzip(bytes);
        bytes = inflated;
    }
    if (bytes.size() < kNiftiHeaderSize) throw FormatError("file shorter than a NIfTI-1 header");

    bool swap = false;
    const auto sizeof_hdr = load<std::int32_t>(bytes, 0, false);
    if (sizeof_hdr != 348) {
        if (load<std::int32_t>(bytes, 0, true) != 348) throw FormatError("sizeof_hdr is not 348");
        swap = true;
    }
    if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0) {
        if (std::memcmp(bytes.data() + 344, "ni1\0", 4) == 0) {
            throw UnsupportedError("two-file NIfTI (.hdr/.img) is not supported");
        }
        throw FormatError("bad NIfTI-1 magic");
    }

    std::array<std::int16_t, 8> dim{};
    for (std::size_t i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(bytes, 40 + 2 * i, swap);
    const auto datatype = load<std::int16_t>(bytes, 70, swap);
    const auto bitpix = load<std::int16_t>(bytes, 72, swap);
    std::array<float, 8> pixdim{};
    for (std::size_t i = 0; i < 8; ++i) pixdim[i] = load<float>(bytes, 76 + 4 * i, swap);
    const auto vox_offset = load<float>(bytes, 108, swap);
    const auto scl_slope = load<float>(bytes, 112, swap);
    const auto scl_inter = load<float>(bytes, 116, swap);

    if (dim[0] < 1 || dim[0] > 7) throw FormatError("dim[0] out of range");
    Grid grid;
    for (int a = 0; a < 3; ++a) {
        const bool present = a < dim[0];
        const std::int16_t n = present ? dim[a + 1] : 1;
        if (n < 1) throw FormatError("non-positive dimension");
        grid.dims[a] = static_cast<std::size_t>(n);
        double sp = present ? static_cast<double>(pixdim[a + 1]) : 1.0;
        if (!std::isfinite(sp) || sp == 0.0) throw FormatError("non-positive pixdim");
        if (sp < 0.0) {
            sp = -sp;
            if (warnings) warnings->push_back("negative pixdim[" + std::to_string(a + 1) + "] made positive");
        }
        grid.spacing[a] = sp;
    }
    for (int a = 4; a <= dim[0]; ++a) {
        if (dim[a] != 1) throw UnsupportedError("only 3D volumes are supported (dim[" + std::to_string(a) + "] != 1)");
    }

    std::size_t elem = 0;
    switch (datatype) {
        case kDtUint8: elem = 1; break;
        case kDtInt16: elem = 2; break;
        case kDtFloat32: elem = 4; break;
        default: throw UnsupportedError("NIfTI datatype " + std::to_string(datatype));
    }
    if (bitpix != static_cast<std::int16_t>(8 * elem)) throw FormatError("bitpix does not match datatype");
    if (!std::isfinite(vox_offset) || vox_offset < 348.0F) throw FormatError("vox_offset before end of header");

    const auto offset = static_cast<std::size_t>(vox_offset);
    const std::size_t n = grid.size();
    if (offset > bytes.size() || (bytes.size() - offset) / elem < n) throw FormatError("voxel data truncated");

    std::vector<float> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = offset + i * elem;
        switch (datatype) {
            case kDtUint8: values[i] = static_cast<float>(bytes[at]); break;
            case kDtInt16: values[i] = static_cast<float>(load<std::int16_t>(bytes, at, swap)); break;
            default: values[i] = load<float>(bytes, at, swap); break;
        }
    }
    if (std::isfinite(scl_slope) && scl_slope != 0.0F && (scl_slope != 1.0F || scl_inter != 0.0F)) {
        for (auto& v : values) v = v * scl_slope + scl_inter;
    }
    for (float v : values) {
        if (!std::isfinite(v)) throw FormatError("non-finite voxel value");
    }

    // intent_name is free text; we store the volume kind there on write.
    std::string intent(reinterpret_cast<const char*>(bytes.data() + 328), 16);
    intent = intent.substr(0, intent.find('\0'));
    return make_volume(grid, std::move(values), kind_from_name(intent));
}

inline Volume read_nifti(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
    return parse_nifti(io_detail::read_file(path), warnings);
}

/// Serialises to NIfTI-1: uint8 for binary, float32 for probability, int16
/// (or float32 past 32767) for labels.
inline std::vector<std::uint8_t> encode_nifti(const Volume& v) {
    using namespace io_detail;
    std::int16_t datatype = kDtFloat32;
    std::size_t elem = 4;
    if (v.kind() == VolumeKind::binary) {
        datatype = kDtUint8;
        elem = 1;
    } else if (v.kind() == VolumeKind::labels) {
        const auto values = v.data();
        const float max_label = values.empty() ? 0.0F : *std::max_element(values.begin(), values.end());
        if (max_label <= 32767.0F) {
            datatype = kDtInt16;
            elem = 2;
        }
    }
    for (int a = 0; a < 3; ++a) {
        if (v.dims()[a] > 32767) throw UnsupportedError("dimension exceeds NIfTI-1 int16 range");
    }

    constexpr std::size_t kVoxOffset = 352;
    std::vector<std::uint8_t> bytes(kVoxOffset + v.size() * elem, 0);
    store<std::int32_t>(bytes, 0, 348);
    store<std::int16_t>(bytes, 40, 3);
    for (std::size_t a = 0; a < 3; ++a) store<std::int16_t>(bytes, 42 + 2 * a, static_cast<std::int16_t>(v.dims()[a]));
    for (std::size_t a = 3; a < 7; ++a) store<std::int16_t>(bytes, 42 + 2 * a, 1);
    store<std::int16_t>(bytes, 70, datatype);
    store<std::int16_t>(bytes, 72, static_cast<std::int16_t>(8 * elem));
    store<float>(bytes, 76, 1.0F);  // qfac
    for (std::size_t a = 0; a < 3; ++a) store<float>(bytes, 80 + 4 * a, static_cast<float>(v.spacing()[a]));
    store<float>(bytes, 108, static_cast<float>(kVoxOffset));
    store<float>(bytes, 112, 1.0F);
    bytes[123] = 2;  // xyzt_units: millimetres
    const auto intent = to_string(v.kind());
    std::memcpy(bytes.data() + 328, intent.data(), std::min<std::size_t>(intent.size(), 15));
    std::memcpy(bytes.data() + 344, "n+1\0", 4);

    const auto values = v.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t at = kVoxOffset + i * elem;
        switch (datatype) {
            case kDtUint8: bytes[at] = static_cast<std::uint8_t>(values[i]); break;
            case kDtInt16: store<std::int16_t>(bytes, at, static_cast<std::int16_t>(values[i])); break;
            default: store<float>(bytes, at, values[i]); break;
        }
    }
    return bytes;
}

/// Writes `path`; gzip-compressed when the name ends in ".gz".
inline void write_nifti(const Volume& v, const std::filesystem::path& path) {
    auto bytes = encode_nifti(v);
    if (io_detail::ends_with(path.string(), ".gz")) bytes = io_detail::gzip(bytes);
    io_detail::write_file(path, bytes);
}

/// Reads a raw x-fastest voxel dump described by a JSON sidecar.
inline Volume read_raw(const std::filesystem::path& data_path, const std::filesystem::path& meta_path) {
    using nlohmann::json;
    const auto meta_bytes = io_detail::read_file(meta_path);
    json meta;
    try {
        meta = json::parse(meta_bytes.begin(), meta_bytes.end());
    } catch (const json::exception& e) {
        throw FormatError("sidecar '" + meta_path.string() + "' is not valid JSON: " + e.what());
    }
    Grid grid;
    std::string dtype;
    std::optional<VolumeKind> declared;
    try {
        for (const char* key : {"dims", "spacing_mm", "dtype", "order"}) {
            if (!meta.contains(key)) throw FormatError(std::string("sidecar missing field '") + key + "'");
        }
        const auto& dims = meta.at("dims");
        const auto& spacing = meta.at("spacing_mm");
        if (!dims.is_array() || dims.size() != 3 || !spacing.is_array() || spacing.size() != 3) {
            throw FormatError("dims and spacing_mm must be 3-element arrays");
        }
        for (std::size_t a = 0; a < 3; ++a) {
            const auto d = dims[a].get<std::int64_t>();
            if (d < 1) throw FormatError("non-positive dimension in sidecar");
            grid.dims[a] = static_cast<std::size_t>(d);
            grid.spacing[a] = spacing[a].get<double>();
            if (!(grid.spacing[a] > 0.0) || !std::isfinite(grid.spacing[a])) {
                throw FormatError("non-positive spacing in sidecar");
            }
        }
        dtype = meta.at("dtype").get<std::string>();
        if (meta.at("order").get<std::string>() != "x-fastest") throw UnsupportedError("voxel order other than x-fastest");
        if (meta.contains("kind")) {
            declared = io_detail::kind_from_name(meta.at("kind").get<std::string>());
            if (!declared) throw FormatError("unknown kind in sidecar");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("sidecar field has the wrong type: ") + e.what());
    }

    std::size_t elem = 0;
    if (dtype == "u8") {
        elem = 1;
    } else if (dtype == "f32") {
        elem = 4;
    } else {
        throw UnsupportedError("raw dtype '" + dtype + "'");
    }
    const auto bytes = io_detail::read_file(data_path);
    if (bytes.size() != grid.size() * elem) {
        throw FormatError("raw data is " + std::to_string(bytes.size()) + " bytes, sidecar implies " +
                          std::to_string(grid.size() * elem));
    }
    std::vector<float> values(grid.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = elem == 1 ? static_cast<float>(bytes[i]) : io_detail::load<float>(bytes, 4 * i, false);
        if (!std::isfinite(values[i])) throw FormatError("non-finite voxel value");
    }
    return io_detail::make_volume(grid, std::move(values), declared);
}

inline std::filesystem::path raw_sidecar_path(const std::filesystem::path& data_path) {
    return std::filesystem::path(data_path.string() + ".json");
}

/// Writes `<path>` and its sidecar `<path>.json`. Binary volumes use u8,
/// everything else f32.
inline void write_raw(const Volume& v, const std::filesystem::path& path) {
    const bool u8 = v.kind() == VolumeKind::binary;
    std::vector<std::uint8_t> bytes(v.size() * (u8 ? 1 : 4));
    const auto values = v.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (u8) {
            bytes[i] = static_cast<std::uint8_t>(values[i]);
        } else {
            io_detail::store<float>(bytes, 4 * i, values[i]);
        }
    }
    io_detail::write_file(path, bytes);
    nlohmann::ordered_json meta;
    meta["dims"] = {v.dims()[0], v.dims()[1], v.dims()[2]};
    meta["spacing_mm"] = {v.spacing()[0], v.spacing()[1], v.spacing()[2]};
    meta["dtype"] = u8 ? "u8" : "f32";
    meta["order"] = "x-fastest";
    meta["kind"] = std::string(to_string(v.kind()));
    const std::string text = meta.dump(2) + "\n";
    io_detail::write_file(raw_sidecar_path(path),
                          std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline void write_volume(const Volume& v, const std::filesystem::path& path, VolumeFormat format) {
    if (format == VolumeFormat::nifti) {
        write_nifti(v, path);
    } else {
        write_raw(v, path);
    }
}

/// Reads by file name: *.nii / *.nii.gz as NIfTI, anything else as raw with
/// a `<path>.json` sidecar.
inline Volume read_volume(const std::filesystem::path& path) {
    const std::string name = path.string();
    if (io_detail::ends_with(name, ".nii") || io_detail::ends_with(name, ".nii.gz")) return read_nifti(path);
    return read_raw(path, raw_sidecar_path(path));
}

}  // namespace lesioneval
