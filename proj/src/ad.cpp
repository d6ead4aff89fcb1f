#include "maker/ad.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace maker::ad {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

Param& ParamStore::add(const std::string& name, Mat init, bool trainable) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw std::logic_error("duplicate parameter: " + name);
    it->second.value = std::move(init);
    it->second.grad = Mat::Zero(it->second.value.rows(), it->second.value.cols());
    it->second.trainable = trainable;
    return it->second;
}

Param& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter: " + name);
    return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter: " + name);
    return it->second;
}

bool ParamStore::has(const std::string& name) const {
    return params_.count(name) != 0;
}

void ParamStore::zero_grad() {
    for (auto& [name, p] : params_) p.grad.setZero();
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1, double(step_count_));
    const double bc2 = 1.0 - std::pow(beta2, double(step_count_));
    for (auto& [name, p] : params_) {
        if (!p.trainable) continue;
        if (p.m.size() == 0) {
            p.m = Mat::Zero(p.value.rows(), p.value.cols());
            p.v = Mat::Zero(p.value.rows(), p.value.cols());
        }
        p.m = beta1 * p.m + (1.0 - beta1) * p.grad;
        p.v = beta2 * p.v + (1.0 - beta2) * p.grad.array().square().matrix();
        const Mat mhat = p.m / bc1;
        const Mat vhat = p.v / bc2;
        p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
    }
}

std::uint64_t ParamStore::checksum() const { return checksum(""); }

std::uint64_t ParamStore::checksum(const std::string& prefix) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [name, p] : params_) {
        if (name.rfind(prefix, 0) != 0) continue;
        h = fnv1a(name.data(), name.size(), h);
        h = fnv1a(p.value.data(), sizeof(double) * std::size_t(p.value.size()), h);
    }
    return h;
}

double ParamStore::grad_norm(const std::string& prefix) const {
    double s = 0.0;
    for (const auto& [name, p] : params_) {
        if (name.rfind(prefix, 0) != 0) continue;
        s += p.grad.squaredNorm();
    }
    return std::sqrt(s);
}

Node* Tape::fresh(Mat val) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.val = std::move(val);
    n.grad = Mat::Zero(n.val.rows(), n.val.cols());
    return &n;
}

Var Tape::constant(Mat value) { return Var(fresh(std::move(value))); }

Var Tape::leaf(Param& p) {
    Node* n = fresh(p.value);
    Param* pp = &p;
    n->back = [pp](Node& self) { pp->grad += self.grad; };
    return Var(n);
}

Var Tape::add(Var a, Var b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("add: shape mismatch");
    Node* n = fresh(a.val() + b.val());
    Node *pa = a.node(), *pb = b.node();
    n->back = [pa, pb](Node& self) {
        pa->grad += self.grad;
        pb->grad += self.grad;
    };
    return Var(n);
}

Var Tape::sub(Var a, Var b) {
    Node* n = fresh(a.val() - b.val());
    Node *pa = a.node(), *pb = b.node();
    n->back = [pa, pb](Node& self) {
        pa->grad += self.grad;
        pb->grad -= self.grad;
    };
    return Var(n);
}

Var Tape::scale(Var a, double s) {
    Node* n = fresh(a.val() * s);
    Node* pa = a.node();
    n->back = [pa, s](Node& self) { pa->grad += s * self.grad; };
    return Var(n);
}

Var Tape::matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
    Node* n = fresh(a.val() * b.val());
    Node *pa = a.node(), *pb = b.node();
    n->back = [pa, pb](Node& self) {
        pa->grad += self.grad * pb->val.transpose();
        pb->grad += pa->val.transpose() * self.grad;
    };
    return Var(n);
}

Var Tape::matmul_nt(Var a, Var b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: shape mismatch");
    Node* n = fresh(a.val() * b.val().transpose());
    Node *pa = a.node(), *pb = b.node();
    n->back = [pa, pb](Node& self) {
        pa->grad += self.grad * pb->val;
        pb->grad += self.grad.transpose() * pa->val;
    };
    return Var(n);
}

Var Tape::add_row(Var a, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw std::invalid_argument("add_row: expected 1 x cols row");
    Mat out = a.val();
    out.rowwise() += Eigen::RowVectorXd(row.val().row(0));
    Node* n = fresh(std::move(out));
    Node *pa = a.node(), *pr = row.node();
    n->back = [pa, pr](Node& self) {
        pa->grad += self.grad;
        pr->grad += self.grad.colwise().sum();
    };
    return Var(n);
}

Var Tape::relu(Var a) {
    Node* n = fresh(a.val().cwiseMax(0.0));
    Node* pa = a.node();
    n->back = [pa](Node& self) {
        pa->grad.array() +=
            self.grad.array() * (pa->val.array() > 0.0).cast<double>();
    };
    return Var(n);
}

Var Tape::softmax_rows(Var a) {
    Mat out = a.val();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double mx = out.row(r).maxCoeff();
        out.row(r) = (out.row(r).array() - mx).exp();
        out.row(r) /= out.row(r).sum();
    }
    Node* n = fresh(std::move(out));
    Node* pa = a.node();
    n->back = [pa](Node& self) {
        for (Eigen::Index r = 0; r < self.val.rows(); ++r) {
            const double dot = self.grad.row(r).dot(self.val.row(r));
            pa->grad.row(r).array() +=
                (self.grad.row(r).array() - dot) * self.val.row(r).array();
        }
    };
    return Var(n);
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
    const Eigen::Index d = x.cols();
    if (gain.cols() != d || bias.cols() != d)
        throw std::invalid_argument("layer_norm: gain/bias width mismatch");
    Mat xhat(x.rows(), d);
    Eigen::VectorXd inv_sd(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mu = x.val().row(r).mean();
        const double var = (x.val().row(r).array() - mu).square().mean();
        inv_sd(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (x.val().row(r).array() - mu) * inv_sd(r);
    }
    Mat out = xhat;
    out.array().rowwise() *= gain.val().row(0).array();
    out.rowwise() += Eigen::RowVectorXd(bias.val().row(0));
    Node* n = fresh(std::move(out));
    Node *px = x.node(), *pg = gain.node(), *pb = bias.node();
    n->back = [px, pg, pb, xhat, inv_sd](Node& self) {
        const Eigen::Index d = xhat.cols();
        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
            Eigen::RowVectorXd ghat =
                (self.grad.row(r).array() * pg->val.row(0).array()).matrix();
            const double mg = ghat.mean();
            const double mgx = (ghat.array() * xhat.row(r).array()).mean();
            px->grad.row(r).array() +=
                (ghat.array() - mg - xhat.row(r).array() * mgx) * inv_sd(r);
            pg->grad.row(0).array() +=
                self.grad.row(r).array() * xhat.row(r).array();
            pb->grad.row(0) += self.grad.row(r);
            (void)d;
        }
    };
    return Var(n);
}

Var Tape::concat_rows(Var a, Var b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("concat_rows: width mismatch");
    Mat out(a.rows() + b.rows(), a.cols());
    out.topRows(a.rows()) = a.val();
    out.bottomRows(b.rows()) = b.val();
    Node* n = fresh(std::move(out));
    Node *pa = a.node(), *pb = b.node();
    const Eigen::Index ra = a.rows();
    n->back = [pa, pb, ra](Node& self) {
        pa->grad += self.grad.topRows(ra);
        pb->grad += self.grad.bottomRows(self.grad.rows() - ra);
    };
    return Var(n);
}

Var Tape::concat_cols(Var a, Var b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: height mismatch");
    Mat out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a.val();
    out.rightCols(b.cols()) = b.val();
    Node* n = fresh(std::move(out));
    Node *pa = a.node(), *pb = b.node();
    const Eigen::Index ca = a.cols();
    n->back = [pa, pb, ca](Node& self) {
        pa->grad += self.grad.leftCols(ca);
        pb->grad += self.grad.rightCols(self.grad.cols() - ca);
    };
    return Var(n);
}

Var Tape::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows())
        throw std::invalid_argument("slice_rows: out of range");
    Node* n = fresh(a.val().middleRows(start, count));
    Node* pa = a.node();
    n->back = [pa, start, count](Node& self) {
        pa->grad.middleRows(start, count) += self.grad;
    };
    return Var(n);
}

Var Tape::replace_rows(Var a, const std::vector<int>& rows, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw std::invalid_argument("replace_rows: expected 1 x cols row");
    Mat out = a.val();
    for (int r : rows) out.row(r) = row.val().row(0);
    Node* n = fresh(std::move(out));
    Node *pa = a.node(), *pr = row.node();
    std::vector<int> idx = rows;
    n->back = [pa, pr, idx](Node& self) {
        Mat g = self.grad;
        for (int r : idx) {
            pr->grad.row(0) += g.row(r);
            g.row(r).setZero();
        }
        pa->grad += g;
    };
    return Var(n);
}

Var Tape::mean_rows(Var a) {
    Node* n = fresh(a.val().colwise().mean());
    Node* pa = a.node();
    const double inv = 1.0 / double(a.rows());
    n->back = [pa, inv](Node& self) {
        pa->grad.rowwise() += Eigen::RowVectorXd(inv * self.grad.row(0));
    };
    return Var(n);
}

Var Tape::reshape_rowmajor(Var a, Eigen::Index r, Eigen::Index c) {
    if (r * c != a.rows() * a.cols())
        throw std::invalid_argument("reshape: element count mismatch");
    Mat out(r, c);
    const Mat& src = a.val();
    for (Eigen::Index i = 0; i < r * c; ++i)
        out(i / c, i % c) = src(i / src.cols(), i % src.cols());
    Node* n = fresh(std::move(out));
    Node* pa = a.node();
    n->back = [pa](Node& self) {
        const Eigen::Index c = self.grad.cols();
        const Eigen::Index sc = pa->grad.cols();
        for (Eigen::Index i = 0; i < self.grad.size(); ++i)
            pa->grad(i / sc, i % sc) += self.grad(i / c, i % c);
    };
    return Var(n);
}

Var Tape::mae(Var a, const Mat& target) {
    if (a.rows() != target.rows() || a.cols() != target.cols())
        throw std::invalid_argument("mae: shape mismatch");
    const Mat diff = a.val() - target;
    Mat out(1, 1);
    out(0, 0) = diff.cwiseAbs().mean();
    Node* n = fresh(std::move(out));
    Node* pa = a.node();
    const double inv = 1.0 / double(diff.size());
    Mat sign = diff.array().sign().matrix();
    n->back = [pa, inv, sign](Node& self) {
        pa->grad += self.grad(0, 0) * inv * sign;
    };
    return Var(n);
}

Var Tape::sum_sq(Var a) {
    Mat out(1, 1);
    out(0, 0) = a.val().squaredNorm();
    Node* n = fresh(std::move(out));
    Node* pa = a.node();
    n->back = [pa](Node& self) { pa->grad += 2.0 * self.grad(0, 0) * pa->val; };
    return Var(n);
}

void Tape::backward(Var scalar_loss) {
    if (scalar_loss.rows() != 1 || scalar_loss.cols() != 1)
        throw std::invalid_argument("backward: loss must be 1x1");
    scalar_loss.node()->grad(0, 0) = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->back) it->back(*it);
    }
}

}  // namespace maker::ad
