#ifndef CTDS_IO_HPP
#define CTDS_IO_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctds/common.hpp"

namespace ctds {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// base64 for raw little-endian double arrays
// ---------------------------------------------------------------------------

namespace detail {
inline const char* b64_alphabet() {
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}
}  // namespace detail

inline std::string base64_encode(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    const char* tab = detail::b64_alphabet();
    std::string out;
    out.reserve((bytes + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes; i += 3) {
        const unsigned v = (p[i] << 16) | (p[i + 1] << 8) | p[i + 2];
        out.push_back(tab[(v >> 18) & 63]);
        out.push_back(tab[(v >> 12) & 63]);
        out.push_back(tab[(v >> 6) & 63]);
        out.push_back(tab[v & 63]);
    }
    if (i < bytes) {
        unsigned v = p[i] << 16;
        if (i + 1 < bytes) v |= p[i + 1] << 8;
        out.push_back(tab[(v >> 18) & 63]);
        out.push_back(tab[(v >> 12) & 63]);
        out.push_back(i + 1 < bytes ? tab[(v >> 6) & 63] : '=');
        out.push_back('=');
    }
    return out;
}

inline std::vector<unsigned char> base64_decode(const std::string& s) {
    int rev[256];
    for (int i = 0; i < 256; ++i) rev[i] = -1;
    const char* tab = detail::b64_alphabet();
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(tab[i])] = i;
    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    unsigned acc = 0;
    int nbits = 0;
    for (char c : s) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = rev[static_cast<unsigned char>(c)];
        require(v >= 0, "base64: invalid character");
        acc = (acc << 6) | static_cast<unsigned>(v);
        nbits += 6;
        if (nbits >= 8) {
            nbits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> nbits) & 0xff));
        }
    }
    return out;
}

inline std::string encode_doubles(const Vec& v) {
    return base64_encode(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

inline std::string encode_doubles(const Mat& m) {
    return base64_encode(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
}

inline Vec decode_doubles(const std::string& s, Index expected) {
    const auto bytes = base64_decode(s);
    require(bytes.size() == static_cast<std::size_t>(expected) * sizeof(double),
            "checkpoint: encoded array has wrong length");
    Vec v(expected);
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

// ---------------------------------------------------------------------------
// FNV-1a hash for manifest fingerprints
// ---------------------------------------------------------------------------

inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// small file helpers
// ---------------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot open for writing: " + path);
    f << content;
    require(f.good(), "write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot open: " + path);
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

inline json read_json_file(const std::string& path) {
    return json::parse(read_text_file(path));
}

// Append-only JSON-lines sink.
class JsonlWriter {
   public:
    explicit JsonlWriter(const std::string& path) : f_(path, std::ios::app | std::ios::binary) {
        require(f_.good(), "cannot open log: " + path);
    }
    void write(const ordered_json& row) {
        f_ << row.dump() << "\n";
        f_.flush();
    }

   private:
    std::ofstream f_;
};

// ---------------------------------------------------------------------------
// CSV artifacts: deterministic formatting, manifest hash as a comment line,
// fixed column headers.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_samples_csv(const std::string& path, const Mat& points,
                              const std::string& manifest_hash) {
    require(points.rows() == 2, "samples CSV expects 2-d points");
    std::string out = "# manifest " + manifest_hash + "\nx0,x1\n";
    for (Index j = 0; j < points.cols(); ++j)
        out += format_double(points(0, j)) + "," + format_double(points(1, j)) + "\n";
    write_text_file(path, out);
}

inline void write_beta_hist_csv(const std::string& path, const Vec& edges,
                                const Eigen::VectorXi& counts, const std::string& manifest_hash) {
    std::string out = "# manifest " + manifest_hash + "\nbeta,count\n";
    for (Index i = 0; i < counts.size(); ++i) {
        const double center = 0.5 * (edges[i] + edges[i + 1]);
        out += format_double(center) + "," + std::to_string(counts[i]) + "\n";
    }
    write_text_file(path, out);
}

struct CsvTable {
    std::string manifest_hash;
    std::string header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const std::string& path) {
    CsvTable t;
    std::ifstream f(path);
    require(f.good(), "cannot open: " + path);
    std::string line;
    bool header_done = false;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line.rfind("# manifest ", 0) == 0) {
            t.manifest_hash = line.substr(11);
            continue;
        }
        if (!header_done) {
            t.header = line;
            header_done = true;
            continue;
        }
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t comma = line.find(',', pos);
            const std::string cell =
                line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            row.push_back(std::strtod(cell.c_str(), nullptr));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        t.rows.push_back(std::move(row));
    }
    require(header_done, "empty CSV: " + path);
    return t;
}

// ---------------------------------------------------------------------------
// minimal deterministic SVG rendering
// ---------------------------------------------------------------------------

inline std::string svg_scatter(const std::vector<std::vector<double>>& rows, double extent) {
    const int size = 640;
    auto sx = [&](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", (v + extent) / (2.0 * extent) * size);
        return std::string(buf);
    };
    auto sy = [&](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", (extent - v) / (2.0 * extent) * size);
        return std::string(buf);
    };
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
                      "viewBox=\"0 0 640 640\">\n<rect width=\"640\" height=\"640\" "
                      "fill=\"white\"/>\n";
    for (const auto& r : rows) {
        if (r.size() < 2) continue;
        out += "<circle cx=\"" + sx(r[0]) + "\" cy=\"" + sy(r[1]) +
               "\" r=\"1.5\" fill=\"#1f77b4\" fill-opacity=\"0.55\"/>\n";
    }
    out += "</svg>\n";
    return out;
}

inline std::string svg_histogram(const std::vector<std::vector<double>>& rows) {
    const int w = 640, h = 420, pad = 40;
    double maxc = 1.0;
    for (const auto& r : rows)
        if (r.size() >= 2) maxc = std::max(maxc, r[1]);
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
                      "viewBox=\"0 0 640 420\">\n<rect width=\"640\" height=\"420\" "
                      "fill=\"white\"/>\n";
    const double bw = static_cast<double>(w - 2 * pad) / std::max<std::size_t>(1, rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() < 2) continue;
        const double bh = rows[i][1] / maxc * (h - 2 * pad);
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
                      "fill=\"#ff7f0e\"/>\n",
                      pad + i * bw + 1.0, h - pad - bh, bw - 2.0, bh);
        out += buf;
    }
    out += "</svg>\n";
    return out;
}

}  // namespace ctds

#endif  // CTDS_IO_HPP
