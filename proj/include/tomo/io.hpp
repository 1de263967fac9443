#pragma once

// Point cloud file I/O: ascii "x y z" lines and binary little-endian PLY.

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tomo/common.hpp"
#include "tomo/core.hpp"

namespace tomo::io {

namespace detail {

inline std::size_t ply_scalar_size(const std::string& type) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32") return 4;
    if (type == "float" || type == "float32") return 4;
    if (type == "double" || type == "float64") return 8;
    throw ParseError("ply: unsupported property type '" + type + "'");
}

inline PointCloud load_ply(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (line != "ply" && line != "ply\r") throw ParseError(path + ": missing ply magic");

    bool little_endian = false;
    std::size_t vertex_count = 0;
    // Byte offset of x/y/z within a vertex record; -1 until declared.
    std::ptrdiff_t off_x = -1, off_y = -1, off_z = -1;
    std::size_t off_xyz_size[3] = {0, 0, 0};
    std::string off_xyz_type[3];
    std::size_t stride = 0;
    bool in_vertex_element = false;
    bool seen_vertex = false;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment" || word == "obj_info" || word.empty()) continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") {
                little_endian = true;
            } else {
                throw ParseError(path + ": unsupported ply format '" + fmt + "'");
            }
        } else if (word == "element") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            in_vertex_element = (name == "vertex");
            if (in_vertex_element) {
                vertex_count = count;
                seen_vertex = true;
            }
        } else if (word == "property") {
            if (!in_vertex_element) continue;
            std::string type;
            ls >> type;
            if (type == "list") throw ParseError(path + ": list property in vertex element");
            std::string name;
            ls >> name;
            std::size_t sz = ply_scalar_size(type);
            if (name == "x" || name == "y" || name == "z") {
                int idx = name == "x" ? 0 : name == "y" ? 1 : 2;
                if (idx == 0) off_x = static_cast<std::ptrdiff_t>(stride);
                if (idx == 1) off_y = static_cast<std::ptrdiff_t>(stride);
                if (idx == 2) off_z = static_cast<std::ptrdiff_t>(stride);
                off_xyz_size[idx] = sz;
                off_xyz_type[idx] = type;
            }
            stride += sz;
        } else if (word == "end_header") {
            break;
        }
        // Unknown header keywords are skipped.
    }
    if (!little_endian) throw ParseError(path + ": missing binary_little_endian format line");
    if (!seen_vertex) throw ParseError(path + ": no vertex element");
    if (off_x < 0 || off_y < 0 || off_z < 0)
        throw ParseError(path + ": vertex element lacks x/y/z properties");

    auto read_coord = [&](const std::uint8_t* rec, std::ptrdiff_t off, int idx) -> double {
        const std::uint8_t* p = rec + off;
        if (off_xyz_size[idx] == 4 &&
            (off_xyz_type[idx] == "float" || off_xyz_type[idx] == "float32")) {
            return static_cast<double>(le::get_f32(p));
        }
        if (off_xyz_size[idx] == 8) return le::get_f64(p);
        throw ParseError(path + ": x/y/z must be float or double");
    };

    std::vector<std::uint8_t> record(stride);
    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(stride));
        if (static_cast<std::size_t>(in.gcount()) != stride)
            throw ParseError(path + ": truncated vertex data");
        Point3 p{read_coord(record.data(), off_x, 0), read_coord(record.data(), off_y, 1),
                 read_coord(record.data(), off_z, 2)};
        if (!is_finite(p)) throw NonFiniteCoordinate(path + ": non-finite vertex");
        cloud.points.push_back(p);
    }
    return cloud;
}

inline PointCloud load_xyz(std::istream& in, const std::string& path) {
    PointCloud cloud;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        // Tokenize and convert via strtod so that "nan" and "inf" parse to
        // doubles and fall through to the finite check below.
        std::istringstream ls(line);
        std::string tok[3];
        std::string extra;
        if (!(ls >> tok[0] >> tok[1] >> tok[2])) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'x y z'");
        }
        if (ls >> extra) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": trailing data");
        }
        Point3 p;
        double* coord[3] = {&p.x, &p.y, &p.z};
        for (int i = 0; i < 3; ++i) {
            char* end = nullptr;
            *coord[i] = std::strtod(tok[i].c_str(), &end);
            if (end == tok[i].c_str() || *end != '\0') {
                throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'x y z'");
            }
        }
        if (!is_finite(p))
            throw NonFiniteCoordinate(path + ":" + std::to_string(lineno) + ": non-finite value");
        cloud.points.push_back(p);
    }
    return cloud;
}

}  // namespace detail

// Format is sniffed from the content: files opening with the "ply" magic are
// parsed as binary little-endian PLY, anything else as ascii x-y-z lines.
inline PointCloud load_cloud(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 3);
    in.clear();
    in.seekg(0);
    if (std::memcmp(magic, "ply", 3) == 0) return detail::load_ply(in, path);
    return detail::load_xyz(in, path);
}

inline void save_cloud_xyz(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    char buf[128];
    for (const Point3& p : cloud.points) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x, p.y, p.z);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

inline void save_cloud_ply(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << cloud.points.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\nend_header\n";
    std::vector<std::uint8_t> rec;
    rec.reserve(cloud.points.size() * 12);
    for (const Point3& p : cloud.points) {
        le::put_f32(rec, static_cast<float>(p.x));
        le::put_f32(rec, static_cast<float>(p.y));
        le::put_f32(rec, static_cast<float>(p.z));
    }
    out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    if (!out) throw IoError("write failed: " + path);
}

// Chooses the container by extension: .ply gets binary PLY, everything else
// ascii x-y-z.
inline void save_cloud(const PointCloud& cloud, const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".ply") {
        save_cloud_ply(cloud, path);
    } else {
        save_cloud_xyz(cloud, path);
    }
}

}  // namespace tomo::io
