#pragma once

#include <Eigen/Dense>
#include <vector>

namespace rolespace {

/// Optimal one-to-one assignment maximizing the total score of a square matrix.
/// Returns `col_of_row`, i.e. row r is matched with column col_of_row[r].
std::vector<int> hungarian_maximize(const Eigen::MatrixXd& score);

}  // namespace rolespace
