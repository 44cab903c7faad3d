#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gae/mat.hpp"

namespace gae {

class Tape;
struct Tensor;

/// Named, ordered collection of trainable matrices. Iteration order is
/// insertion order everywhere (optimizer updates, checkpoints, gradient
/// checks) so runs are reproducible.
class ParamStore {
public:
  Mat& add(const std::string& name, Mat value);
  bool has(const std::string& name) const;
  Mat& get(const std::string& name);
  const Mat& get(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  size_t size() const { return order_.size(); }
  size_t scalar_count() const;

  /// Registers the stored matrix on the tape as a differentiable leaf.
  Tensor lease(Tape& tape, const std::string& name) const;

  /// Binary checkpoint: a version header line, then per tensor
  /// "name<TAB>RxC<TAB>" + rows*cols little-endian doubles + "\n".
  void save(const std::string& path) const;
  static ParamStore load(const std::string& path);

private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Mat> by_name_;
};

}  // namespace gae
