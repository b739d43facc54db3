#include "carnot/snapshot.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "carnot/csv.hpp"
#include "carnot/error.hpp"

namespace carnot {

namespace {

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ' ';
        if constexpr (std::is_floating_point_v<T>)
            s += fmt(v[i]);
        else
            s += std::to_string(v[i]);
    }
    return s;
}

template <class T>
std::vector<T> split(const std::string& s) {
    std::istringstream in(s);
    std::vector<T> out;
    T v;
    while (in >> v) out.push_back(v);
    return out;
}

}  // namespace

void write_snapshot(const std::string& base, const Snapshot& snap) {
    const BoxGrid& g = snap.grid;
    if (snap.values.size() != g.size()) throw Error(ErrorKind::InvalidArgument, "snapshot size does not match grid");
    std::ofstream hdr(base + ".hdr");
    if (!hdr) throw Error(ErrorKind::InvalidArgument, "cannot write " + base + ".hdr");
    hdr << "format = carnot-snapshot-1\n";
    hdr << "dims = " << g.dim() << "\n";
    hdr << "shape = " << join(g.shape()) << "\n";
    hdr << "lower = " << join(g.lower()) << "\n";
    hdr << "spacing = " << join(g.spacing()) << "\n";
    hdr << "time = " << fmt(snap.time) << "\n";
    hdr << "epsilon = " << fmt(snap.epsilon) << "\n";
    std::vector<double> a(snap.A.size());
    for (Eigen::Index i = 0; i < snap.A.rows(); ++i)
        for (Eigen::Index j = 0; j < snap.A.cols(); ++j) a[i * snap.A.cols() + j] = snap.A(i, j);
    hdr << "A_rows = " << snap.A.rows() << "\n";
    hdr << "A = " << join(a) << "\n";
    hdr << "endianness = little\ndtype = float64\norder = row-major-last-fastest\n";

    std::ofstream bin(base + ".bin", std::ios::binary);
    if (!bin) throw Error(ErrorKind::InvalidArgument, "cannot write " + base + ".bin");
    if constexpr (std::endian::native == std::endian::little) {
        bin.write(reinterpret_cast<const char*>(snap.values.data()),
                  static_cast<std::streamsize>(snap.values.size() * sizeof(double)));
    } else {
        for (double v : snap.values) {
            unsigned char b[8];
            std::memcpy(b, &v, 8);
            for (int i = 7; i >= 0; --i) bin.put(static_cast<char>(b[i]));
        }
    }
}

Snapshot read_snapshot(const std::string& base) {
    std::ifstream hdr(base + ".hdr");
    if (!hdr) throw Error(ErrorKind::ParseError, "cannot read " + base + ".hdr");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(hdr, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    for (const char* key : {"shape", "lower", "spacing", "time", "epsilon"})
        if (!kv.count(key)) throw Error(ErrorKind::ParseError, std::string("snapshot header lacks ") + key);
    if (kv.count("dtype") && kv["dtype"] != "float64") throw Error(ErrorKind::ParseError, "unsupported dtype");
    Snapshot s;
    s.grid = BoxGrid(split<int>(kv["shape"]), split<double>(kv["lower"]), split<double>(kv["spacing"]));
    s.time = std::stod(kv["time"]);
    s.epsilon = std::stod(kv["epsilon"]);
    const auto a = split<double>(kv["A"]);
    const int rows = kv.count("A_rows") ? std::stoi(kv["A_rows"]) : 0;
    if (rows > 0) {
        const int cols = static_cast<int>(a.size()) / rows;
        s.A.resize(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) s.A(i, j) = a[i * cols + j];
    }
    std::ifstream bin(base + ".bin", std::ios::binary);
    if (!bin) throw Error(ErrorKind::ParseError, "cannot read " + base + ".bin");
    s.values.resize(s.grid.size());
    for (double& v : s.values) {
        unsigned char b[8];
        if (!bin.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorKind::ParseError, "snapshot data truncated");
        if constexpr (std::endian::native != std::endian::little) std::reverse(b, b + 8);
        std::memcpy(&v, b, 8);
    }
    return s;
}

}  // namespace carnot
