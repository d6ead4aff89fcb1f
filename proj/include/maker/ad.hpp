// Reverse-mode automatic differentiation over Eigen double matrices.
// A Tape owns the nodes of one forward pass; backward() walks them in
// reverse creation order. Parameters live in a ParamStore and survive
// across tapes; leaf() bridges a Param into the current tape.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace maker::ad {

using Mat = Eigen::MatrixXd;

struct Param {
    Mat value;
    Mat grad;
    // Adam moment slots, allocated on first optimizer step.
    Mat m;
    Mat v;
    bool trainable = true;
};

class ParamStore {
public:
    Param& add(const std::string& name, Mat init, bool trainable = true);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool has(const std::string& name) const;

    void zero_grad();
    // One Adam update over all trainable params with non-empty grads.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8);

    std::uint64_t checksum() const;
    std::uint64_t checksum(const std::string& prefix) const;
    double grad_norm(const std::string& prefix) const;

    std::map<std::string, Param>& entries() { return params_; }
    const std::map<std::string, Param>& entries() const { return params_; }

private:
    std::map<std::string, Param> params_;
    std::int64_t step_count_ = 0;
};

struct Node {
    Mat val;
    Mat grad;
    std::function<void(Node&)> back;  // empty for constants
};

// Lightweight handle into a Tape. Invalidated when the tape dies.
class Var {
public:
    Var() = default;
    explicit Var(Node* n) : n_(n) {}
    const Mat& val() const { return n_->val; }
    const Mat& grad() const { return n_->grad; }
    Eigen::Index rows() const { return n_->val.rows(); }
    Eigen::Index cols() const { return n_->val.cols(); }
    bool valid() const { return n_ != nullptr; }
    Node* node() const { return n_; }

private:
    Node* n_ = nullptr;
};

class Tape {
public:
    Var constant(Mat value);
    Var leaf(Param& p);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double s);
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);  // a * b^T
    // Adds a 1 x c row vector to every row of a.
    Var add_row(Var a, Var row);
    Var relu(Var a);
    Var softmax_rows(Var a);
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
    Var concat_rows(Var a, Var b);
    Var concat_cols(Var a, Var b);
    Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
    // Copy of a with the listed rows overwritten by the broadcast 1 x c row.
    Var replace_rows(Var a, const std::vector<int>& rows, Var row);
    Var mean_rows(Var a);  // 1 x c column means
    Var reshape_rowmajor(Var a, Eigen::Index r, Eigen::Index c);
    Var mae(Var a, const Mat& target);  // 1x1 scalar
    Var sum_sq(Var a);                  // 1x1 scalar

    void backward(Var scalar_loss);

    std::size_t size() const { return nodes_.size(); }

private:
    Node* fresh(Mat val);
    std::deque<Node> nodes_;
};

std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t seed = 1469598103934665603ULL);

}  // namespace maker::ad
