#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace autows {

inline constexpr int kAbstain = -1;

// n x K labeling-function outputs. Entry (i, k) is LF k's vote on example i:
// a class index in [0, classes) or kAbstain.
struct VoteMatrix {
  Eigen::MatrixXi values;
  std::vector<std::string> lf_ids;
  int classes = 0;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index lfs() const { return values.cols(); }

  // Throws autows::Error when ids and columns disagree or a vote is out of range.
  void validate() const;
};

}  // namespace autows
