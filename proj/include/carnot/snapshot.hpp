#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "carnot/grid.hpp"

namespace carnot {

/// Grid function on disk: `<base>.bin` holds little-endian float64 values in row-major order (last
/// axis fastest); `<base>.hdr` is a key = value text header.
struct Snapshot {
    BoxGrid grid;
    std::vector<double> values;
    double time = 0.0;
    double epsilon = 0.0;
    Eigen::MatrixXd A;  // may be empty
};

void write_snapshot(const std::string& base, const Snapshot& snap);
Snapshot read_snapshot(const std::string& base);

}  // namespace carnot
