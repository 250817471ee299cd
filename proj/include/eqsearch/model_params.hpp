#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "eqsearch/vocabulary.hpp"

namespace eqsearch {

inline constexpr int kHiddenDim = 512;
inline constexpr int kEmbeddingDim = 64;
inline constexpr int kTagClasses = kTagSlots;            // 32
inline constexpr int kAttrClasses = kAttrSlots + 1;      // 33
inline constexpr int kCharClasses = kCharSlots + 1;      // 193

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Where the two batch-norm layers sit. after_l1_l2 normalizes the outputs
// of conv layers 1 and 2; before_l2_l4 normalizes the outputs of layers 1
// and 3 (the inputs of layers 2 and 4).
enum class BnPlacement { AfterL1L2, BeforeL2L4 };

const char* bn_placement_name(BnPlacement p);
BnPlacement parse_bn_placement(const std::string& name);

inline constexpr double kRunningMomentum = 0.1;
inline constexpr double kBatchNormEpsilon = 1e-5;

template <class T>
struct BatchNormParams {
    Vector<T> gamma, beta;
    Vector<T> running_mean, running_var;
    T momentum = static_cast<T>(kRunningMomentum);
    T epsilon = static_cast<T>(kBatchNormEpsilon);
};

// Running statistics of the pooled-embedding norm used at inference.
template <class T>
struct NormStats {
    T running_norm_mean = 1;
    T running_norm_std = 0;
    T momentum = static_cast<T>(kRunningMomentum);
};

// Every trainable weight plus the running statistics of the encoder.
// Also used as the gradient container (running statistics unused there).
template <class T>
struct ModelParams {
    Matrix<T> W1;  // 512 x 256
    Vector<T> b1;
    T alpha = 1;
    Matrix<T> W2, W3, W4;  // 512 x 512
    Vector<T> b2, b3, b4;
    BatchNormParams<T> bn1, bn2;
    Matrix<T> Wproj;  // 64 x 512
    Vector<T> bproj;
    Matrix<T> Wtag;   // 32 x 512
    Vector<T> btag;
    Matrix<T> Wattr;  // 33 x 512
    Vector<T> battr;
    Matrix<T> Wchar;  // 193 x 512
    Vector<T> bchar;
    NormStats<T> norm;
    BnPlacement bn_placement = BnPlacement::AfterL1L2;

    // All tensors at their shapes, all zeros (alpha too). Batch-norm scale 1,
    // running variance 1.
    static ModelParams zeros();
    // Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights, zero biases, alpha 1.
    static ModelParams initialize(std::uint64_t seed, BnPlacement placement = BnPlacement::AfterL1L2);
    // Every tensor zero, batch-norm scale included; used to accumulate gradients.
    static ModelParams gradient_buffer();

    // Calls f(name, data pointer, element count) for every trainable tensor
    // in a fixed order.
    template <class F>
    void for_each_trainable(F&& f) {
        f("W1", W1.data(), W1.size());
        f("b1", b1.data(), b1.size());
        f("alpha", &alpha, Eigen::Index{1});
        f("W2", W2.data(), W2.size());
        f("b2", b2.data(), b2.size());
        f("W3", W3.data(), W3.size());
        f("b3", b3.data(), b3.size());
        f("W4", W4.data(), W4.size());
        f("b4", b4.data(), b4.size());
        f("bn1.gamma", bn1.gamma.data(), bn1.gamma.size());
        f("bn1.beta", bn1.beta.data(), bn1.beta.size());
        f("bn2.gamma", bn2.gamma.data(), bn2.gamma.size());
        f("bn2.beta", bn2.beta.data(), bn2.beta.size());
        f("Wproj", Wproj.data(), Wproj.size());
        f("bproj", bproj.data(), bproj.size());
        f("Wtag", Wtag.data(), Wtag.size());
        f("btag", btag.data(), btag.size());
        f("Wattr", Wattr.data(), Wattr.size());
        f("battr", battr.data(), battr.size());
        f("Wchar", Wchar.data(), Wchar.size());
        f("bchar", bchar.data(), bchar.size());
    }

    // Trainable tensors followed by running statistics.
    template <class F>
    void for_each_tensor(F&& f) {
        for_each_trainable(f);
        f("bn1.running_mean", bn1.running_mean.data(), bn1.running_mean.size());
        f("bn1.running_var", bn1.running_var.data(), bn1.running_var.size());
        f("bn2.running_mean", bn2.running_mean.data(), bn2.running_mean.size());
        f("bn2.running_var", bn2.running_var.data(), bn2.running_var.size());
        f("norm.running_norm_mean", &norm.running_norm_mean, Eigen::Index{1});
        f("norm.running_norm_std", &norm.running_norm_std, Eigen::Index{1});
    }

    template <class U>
    ModelParams<U> cast() const;

    bool all_finite() const;
};

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

}  // namespace eqsearch
