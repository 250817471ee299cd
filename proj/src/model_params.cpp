#include "eqsearch/model_params.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "eqsearch/error.hpp"

namespace eqsearch {

const char* bn_placement_name(BnPlacement p) {
    return p == BnPlacement::AfterL1L2 ? "after_l1_l2" : "before_l2_l4";
}

BnPlacement parse_bn_placement(const std::string& name) {
    if (name == "after_l1_l2") return BnPlacement::AfterL1L2;
    if (name == "before_l2_l4") return BnPlacement::BeforeL2L4;
    throw InvalidArgument("unknown bn_placement '" + name + "'");
}

namespace {

template <class T>
BatchNormParams<T> fresh_batch_norm() {
    BatchNormParams<T> bn;
    bn.gamma = Vector<T>::Ones(kHiddenDim);
    bn.beta = Vector<T>::Zero(kHiddenDim);
    bn.running_mean = Vector<T>::Zero(kHiddenDim);
    bn.running_var = Vector<T>::Ones(kHiddenDim);
    return bn;
}

template <class T>
void fill_uniform(Matrix<T>& m, std::mt19937_64& rng) {
    double bound = std::sqrt(1.0 / static_cast<double>(m.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

template <class T, class U>
BatchNormParams<U> cast_bn(const BatchNormParams<T>& bn) {
    BatchNormParams<U> out;
    out.gamma = bn.gamma.template cast<U>();
    out.beta = bn.beta.template cast<U>();
    out.running_mean = bn.running_mean.template cast<U>();
    out.running_var = bn.running_var.template cast<U>();
    out.momentum = static_cast<U>(bn.momentum);
    out.epsilon = static_cast<U>(bn.epsilon);
    return out;
}

}  // namespace

template <class T>
ModelParams<T> ModelParams<T>::zeros() {
    ModelParams p;
    p.W1 = Matrix<T>::Zero(kHiddenDim, kFeatureDim);
    p.b1 = Vector<T>::Zero(kHiddenDim);
    p.alpha = 0;
    p.W2 = Matrix<T>::Zero(kHiddenDim, kHiddenDim);
    p.W3 = Matrix<T>::Zero(kHiddenDim, kHiddenDim);
    p.W4 = Matrix<T>::Zero(kHiddenDim, kHiddenDim);
    p.b2 = Vector<T>::Zero(kHiddenDim);
    p.b3 = Vector<T>::Zero(kHiddenDim);
    p.b4 = Vector<T>::Zero(kHiddenDim);
    p.bn1 = fresh_batch_norm<T>();
    p.bn2 = fresh_batch_norm<T>();
    p.Wproj = Matrix<T>::Zero(kEmbeddingDim, kHiddenDim);
    p.bproj = Vector<T>::Zero(kEmbeddingDim);
    p.Wtag = Matrix<T>::Zero(kTagClasses, kHiddenDim);
    p.btag = Vector<T>::Zero(kTagClasses);
    p.Wattr = Matrix<T>::Zero(kAttrClasses, kHiddenDim);
    p.battr = Vector<T>::Zero(kAttrClasses);
    p.Wchar = Matrix<T>::Zero(kCharClasses, kHiddenDim);
    p.bchar = Vector<T>::Zero(kCharClasses);
    return p;
}

template <class T>
ModelParams<T> ModelParams<T>::gradient_buffer() {
    ModelParams p = zeros();
    p.for_each_tensor([](const char*, T* data, Eigen::Index n) { std::fill(data, data + n, T(0)); });
    return p;
}

template <class T>
ModelParams<T> ModelParams<T>::initialize(std::uint64_t seed, BnPlacement placement) {
    ModelParams p = zeros();
    p.bn_placement = placement;
    p.alpha = 1;
    std::mt19937_64 rng(seed);
    for (Matrix<T>* m : {&p.W1, &p.W2, &p.W3, &p.W4, &p.Wproj, &p.Wtag, &p.Wattr, &p.Wchar}) fill_uniform(*m, rng);
    return p;
}

template <class T>
template <class U>
ModelParams<U> ModelParams<T>::cast() const {
    ModelParams<U> out;
    out.W1 = W1.template cast<U>();
    out.b1 = b1.template cast<U>();
    out.alpha = static_cast<U>(alpha);
    out.W2 = W2.template cast<U>();
    out.W3 = W3.template cast<U>();
    out.W4 = W4.template cast<U>();
    out.b2 = b2.template cast<U>();
    out.b3 = b3.template cast<U>();
    out.b4 = b4.template cast<U>();
    out.bn1 = cast_bn<T, U>(bn1);
    out.bn2 = cast_bn<T, U>(bn2);
    out.Wproj = Wproj.template cast<U>();
    out.bproj = bproj.template cast<U>();
    out.Wtag = Wtag.template cast<U>();
    out.btag = btag.template cast<U>();
    out.Wattr = Wattr.template cast<U>();
    out.battr = battr.template cast<U>();
    out.Wchar = Wchar.template cast<U>();
    out.bchar = bchar.template cast<U>();
    out.norm.running_norm_mean = static_cast<U>(norm.running_norm_mean);
    out.norm.running_norm_std = static_cast<U>(norm.running_norm_std);
    out.norm.momentum = static_cast<U>(norm.momentum);
    out.bn_placement = bn_placement;
    return out;
}

template <class T>
bool ModelParams<T>::all_finite() const {
    bool ok = true;
    const_cast<ModelParams*>(this)->for_each_tensor([&](const char*, T* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n && ok; ++i) ok = std::isfinite(static_cast<double>(data[i]));
    });
    return ok;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

}  // namespace eqsearch
