#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rppg/errors.hpp"
#include "rppg/image.hpp"

namespace rppg {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw data_error("io: cannot open for writing: " + p.string());
    return f;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw data_error("io: cannot open: " + p.string());
    return f;
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw data_error("io: truncated file while reading " + what);
    return v;
}

}  // namespace detail

// --- 8-bit frames: binary PPM (P6), interleaved RGB, maxval 255 -------------

inline void write_ppm(const std::filesystem::path& path, const Image<double>& img) {
    auto f = detail::open_out(path);
    const Eigen::Index h = img.height(), w = img.width();
    f << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = std::floor(img.ch[c](y, x) + 0.5);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
            }
        }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw data_error("io: short write: " + path.string());
}

inline Image<double> read_ppm(const std::filesystem::path& path) {
    auto f = detail::open_in(path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw data_error("io: not a binary PPM (P6): " + path.string());
    // Header tokens may be separated by whitespace or '#' comments.
    auto next_int = [&](const char* what) {
        for (;;) {
            int ch = f.peek();
            if (ch == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(ch)) {
                f.get();
            } else {
                break;
            }
        }
        long v = -1;
        f >> v;
        if (!f || v <= 0) throw data_error(std::string("io: bad PPM ") + what + ": " + path.string());
        return v;
    };
    const long w = next_int("width"), h = next_int("height"), maxval = next_int("maxval");
    if (maxval != 255) throw data_error("io: PPM maxval must be 255: " + path.string());
    f.get();  // single whitespace after header

    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    if (!f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw data_error("io: truncated PPM pixel data: " + path.string());

    Image<double> img(h, w);
    std::size_t i = 0;
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.ch[c](y, x) = static_cast<double>(buf[i++]);
    return img;
}

// --- float frames: planar raw ("RAWF") --------------------------------------
// Layout: magic "RAWF", u32 height, u32 width, u32 channels (3), then
// channel-major planes of 32-bit floats, row-major within each plane.

inline void write_rawf(const std::filesystem::path& path, const Image<double>& img) {
    auto f = detail::open_out(path);
    f.write("RAWF", 4);
    detail::write_pod(f, static_cast<std::uint32_t>(img.height()));
    detail::write_pod(f, static_cast<std::uint32_t>(img.width()));
    detail::write_pod(f, static_cast<std::uint32_t>(3));
    for (int c = 0; c < 3; ++c) {
        for (Eigen::Index y = 0; y < img.height(); ++y)
            for (Eigen::Index x = 0; x < img.width(); ++x)
                detail::write_pod(f, static_cast<float>(img.ch[c](y, x)));
    }
    if (!f) throw data_error("io: short write: " + path.string());
}

inline Image<double> read_rawf(const std::filesystem::path& path) {
    auto f = detail::open_in(path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "RAWF", 4) != 0)
        throw data_error("io: not a RAWF file: " + path.string());
    const auto h = detail::read_pod<std::uint32_t>(f, "height");
    const auto w = detail::read_pod<std::uint32_t>(f, "width");
    const auto nc = detail::read_pod<std::uint32_t>(f, "channels");
    if (h == 0 || w == 0 || nc != 3) throw data_error("io: bad RAWF header: " + path.string());

    Image<double> img(h, w);
    for (int c = 0; c < 3; ++c)
        for (std::uint32_t y = 0; y < h; ++y)
            for (std::uint32_t x = 0; x < w; ++x)
                img.ch[c](y, x) = static_cast<double>(detail::read_pod<float>(f, "pixel data"));
    return img;
}

inline Image<double> read_frame(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".ppm") return read_ppm(path);
    if (ext == ".rawf") return read_rawf(path);
    throw data_error("io: unsupported frame format (expect .ppm or .rawf): " + path.string());
}

// Ordered frame files of a clip directory. Zero-padded names sort correctly
// as plain strings.
inline std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw data_error("io: not a directory: " + dir.string());
    std::vector<fs::path> frames;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension().string();
        if (ext == ".ppm" || ext == ".rawf") frames.push_back(e.path());
    }
    std::sort(frames.begin(), frames.end());
    return frames;
}

}  // namespace rppg
