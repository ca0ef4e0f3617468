#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "egokit/errors.hpp"
#include "egokit/vision.hpp"

namespace egokit::vision {

// --- PGM (P5, maxval 255) ---

inline void write_pgm(const std::string& path, const Frame& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "P5\n" << f.width << " " << f.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(f.data.data()), std::streamsize(f.data.size()));
    if (!os) throw IoError("short write: " + path);
}

namespace detail {

inline int pgm_next_token(std::istream& is, std::string& tok) {
    tok.clear();
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (!std::isspace(c)) break;
    }
    if (c == EOF) return -1;
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(char(c));
        c = is.get();
    }
    return c;
}

}  // namespace detail

inline Frame read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::string tok;
    if (detail::pgm_next_token(is, tok) < 0 || tok != "P5") {
        throw IoError("not a binary PGM (P5): " + path);
    }
    int w = 0, h = 0, maxval = 0;
    detail::pgm_next_token(is, tok);
    w = std::stoi(tok);
    detail::pgm_next_token(is, tok);
    h = std::stoi(tok);
    detail::pgm_next_token(is, tok);
    maxval = std::stoi(tok);
    if (maxval != 255) throw IoError("PGM maxval must be 255: " + path);
    std::vector<std::uint8_t> data(std::size_t(w) * std::size_t(h));
    is.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size()));
    if (std::size_t(is.gcount()) != data.size()) throw IoError("truncated PGM: " + path);
    return Frame(w, h, std::move(data));
}

// --- masks as PGM, 255 = valid, 0 = invalid ---

inline void write_mask_pgm(const std::string& path, const ValidityMask& m) {
    Frame f(m.width, m.height, 0);
    for (std::size_t i = 0; i < m.bits.size(); ++i) f.data[i] = m.bits[i] ? 255 : 0;
    write_pgm(path, f);
}

inline ValidityMask read_mask_pgm(const std::string& path) {
    const Frame f = read_pgm(path);
    ValidityMask m(f.width, f.height, false);
    for (std::size_t i = 0; i < f.data.size(); ++i) m.bits[i] = f.data[i] >= 128 ? 1 : 0;
    return m;
}

// --- 8-bit grayscale PNG (color input reduced to BT.601 luma) ---

inline Frame read_png(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw IoError("failed to read PNG: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    const int channels = int(rowbytes / w);
    std::vector<std::uint8_t> raw(rowbytes * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    std::vector<std::uint8_t> data(std::size_t(w) * h);
    if (channels == 1) {
        data = std::move(raw);
        data.resize(std::size_t(w) * h);
    } else if (channels == 3) {
        for (std::size_t i = 0; i < std::size_t(w) * h; ++i) {
            data[i] = rgb_to_luma(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
        }
    } else {
        throw IoError("unsupported PNG channel count: " + path);
    }
    return Frame(int(w), int(h), std::move(data));
}

inline void write_png(const std::string& path, const Frame& f) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw IoError("failed to write PNG: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, png_uint_32(f.width), png_uint_32(f.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(std::size_t(f.height));
    for (int y = 0; y < f.height; ++y) {
        rows[std::size_t(y)] = const_cast<png_bytep>(f.data.data() + std::size_t(y) * f.width);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline Frame read_image(const std::string& path) {
    if (has_suffix(path, ".png") || has_suffix(path, ".PNG")) return read_png(path);
    return read_pgm(path);
}

inline void write_image(const std::string& path, const Frame& f) {
    if (has_suffix(path, ".png") || has_suffix(path, ".PNG")) return write_png(path, f);
    return write_pgm(path, f);
}

// --- correspondences as CSV lines "x,y,x2,y2,weight" ---

inline void write_correspondences_csv(std::ostream& os, const CorrespondenceSet& c) {
    char buf[256];
    for (const Correspondence& p : c) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.a.x(), p.a.y(),
                      p.b.x(), p.b.y(), p.weight);
        os << buf;
    }
}

inline CorrespondenceSet read_correspondences_csv(std::istream& is) {
    CorrespondenceSet out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Correspondence c{};
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream iss(line);
        if (!(iss >> c.a.x() >> c.a.y() >> c.b.x() >> c.b.y() >> c.weight)) {
            throw IoError("bad correspondence line: " + line);
        }
        out.push_back(c);
    }
    return out;
}

}  // namespace egokit::vision
