/*
 * Copyright 2026 The sgformer-cpp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <sgf/error.hpp>
#include <sgf/model.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace sgf {

void ModelConfig::validate() const {
    if (in_dim == 0 || hidden == 0 || out_dim == 0) {
        throw ConfigError("model: in_dim, hidden and out_dim must be positive");
    }
    if (gcn_depth < 1 || gcn_depth > 3) {
        throw ConfigError("model: gcn_depth must be 1, 2 or 3");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("model: alpha must be in [0, 1]");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ConfigError("model: dropout must be in [0, 1)");
    }
}

template <typename T>
std::vector<Matrix<T>*> SgformerParams<T>::tensors() {
    std::vector<Matrix<T>*> out{&w_in, &b_in};
    for (auto [w, b] : {std::pair{&w_q, &b_q}, std::pair{&w_k, &b_k}, std::pair{&w_v, &b_v}}) {
        out.push_back(w);
        if (config.attn_bias) {
            out.push_back(b);
        }
    }
    for (std::size_t l = 0; l < gcn.weights.size(); ++l) {
        out.push_back(&gcn.weights[l]);
        if (config.gcn_bias) {
            out.push_back(&gcn.biases[l]);
        }
    }
    out.push_back(&w_out);
    out.push_back(&b_out);
    return out;
}

template <typename T>
std::vector<const Matrix<T>*> SgformerParams<T>::tensors() const {
    auto mut = const_cast<SgformerParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
}

template <typename T>
std::vector<std::string> SgformerParams<T>::tensor_names() const {
    std::vector<std::string> out{"w_in", "b_in"};
    for (const char* n : {"q", "k", "v"}) {
        out.push_back(std::string("w_") + n);
        if (config.attn_bias) {
            out.push_back(std::string("b_") + n);
        }
    }
    for (std::size_t l = 0; l < gcn.weights.size(); ++l) {
        out.push_back("gcn" + std::to_string(l) + ".w");
        if (config.gcn_bias) {
            out.push_back("gcn" + std::to_string(l) + ".b");
        }
    }
    out.push_back("w_out");
    out.push_back("b_out");
    return out;
}

template <typename T>
std::size_t SgformerParams<T>::num_parameters() const {
    std::size_t n = 0;
    for (const auto* m : tensors()) {
        n += m->size();
    }
    return n;
}

template <typename T>
template <typename U>
SgformerParams<U> SgformerParams<T>::cast() const {
    SgformerParams<U> out;
    out.config = config;
    out.gcn.dropout_p = gcn.dropout_p;
    out.gcn.use_relu_between = gcn.use_relu_between;
    out.gcn.weights.resize(gcn.weights.size());
    out.gcn.biases.resize(gcn.biases.size());
    auto src = tensors();
    auto dst = out.tensors();
    for (std::size_t i = 0; i < src.size(); ++i) {
        *dst[i] = Matrix<U>::cast_from(*src[i]);
    }
    return out;
}

namespace {

template <typename T>
Matrix<T> glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix<T> m(fan_in, fan_out);
    for (T& v : m.flat()) {
        v = static_cast<T>(dist(rng));
    }
    return m;
}

// Zero-filled tensors with the shapes implied by cfg.
template <typename T>
SgformerParams<T> shaped_params(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.hidden;
    SgformerParams<T> p;
    p.config = cfg;
    p.w_in = Matrix<T>(cfg.in_dim, d);
    p.b_in = Matrix<T>(1, d);
    for (auto* w : {&p.w_q, &p.w_k, &p.w_v}) {
        *w = Matrix<T>(d, d);
    }
    if (cfg.attn_bias) {
        for (auto* b : {&p.b_q, &p.b_k, &p.b_v}) {
            *b = Matrix<T>(1, d);
        }
    }
    p.gcn.dropout_p = cfg.dropout;
    for (std::size_t l = 0; l < cfg.gcn_depth; ++l) {
        p.gcn.weights.emplace_back(d, d);
        if (cfg.gcn_bias) {
            p.gcn.biases.emplace_back(1, d);
        }
    }
    p.w_out = Matrix<T>(d, cfg.out_dim);
    p.b_out = Matrix<T>(1, cfg.out_dim);
    return p;
}

} // namespace

template <typename T>
SgformerParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    auto p = shaped_params<T>(cfg);
    std::mt19937_64 rng(seed);
    const std::size_t d = cfg.hidden;
    p.w_in = glorot<T>(cfg.in_dim, d, rng);
    p.w_q = glorot<T>(d, d, rng);
    p.w_k = glorot<T>(d, d, rng);
    p.w_v = glorot<T>(d, d, rng);
    for (auto& w : p.gcn.weights) {
        w = glorot<T>(d, d, rng);
    }
    p.w_out = glorot<T>(d, cfg.out_dim, rng);
    return p;
}

template <typename T>
ForwardVars forward(ad::Tape<T>& t, const SgformerParams<T>& p, const SparseGraph& g_norm,
                    const Matrix<T>& x, const ForwardOptions& opts, std::mt19937_64* rng,
                    bool track_grads) {
    const ModelConfig& cfg = p.config;
    if (x.cols() != cfg.in_dim) {
        throw ShapeError("forward: features have " + std::to_string(x.cols()) +
                         " columns, model expects " + std::to_string(cfg.in_dim));
    }
    if (x.rows() != g_norm.num_nodes()) {
        throw ShapeError("forward: feature rows do not match graph nodes");
    }
    const bool drop = opts.training && cfg.dropout > 0.0;
    if (drop && rng == nullptr) {
        throw ConfigError("forward: training with dropout needs an rng");
    }

    ForwardVars fv;
    for (const Matrix<T>* m : p.tensors()) {
        fv.params.push_back(track_grads ? t.leaf(*m) : t.constant(*m));
    }
    std::size_t i = 0;
    auto next = [&] { return fv.params[i++]; };
    const ad::Var none{};

    const ad::Var w_in = next();
    const ad::Var b_in = next();
    std::array<ad::Var, 3> w_qkv;
    std::array<ad::Var, 3> b_qkv{none, none, none};
    for (std::size_t j = 0; j < 3; ++j) {
        w_qkv[j] = next();
        if (cfg.attn_bias) {
            b_qkv[j] = next();
        }
    }
    std::vector<ad::Var> gw;
    std::vector<ad::Var> gb;
    for (std::size_t l = 0; l < cfg.gcn_depth; ++l) {
        gw.push_back(next());
        if (cfg.gcn_bias) {
            gb.push_back(next());
        }
    }
    const ad::Var w_out = next();
    const ad::Var b_out = next();

    ad::Var z0 = ad::relu(t, ad::linear(t, t.constant(x), w_in, b_in));
    if (drop) {
        z0 = ad::dropout(t, z0, cfg.dropout, *rng);
    }
    const ad::Var q = ad::linear(t, z0, w_qkv[0], b_qkv[0]);
    const ad::Var k = ad::linear(t, z0, w_qkv[1], b_qkv[1]);
    const ad::Var v = ad::linear(t, z0, w_qkv[2], b_qkv[2]);
    fv.z_attn = opts.variant == AttentionVariant::Linear
                    ? ad::linear_attention(t, q, k, v, opts.attention)
                    : ad::explicit_attention(t, q, k, v);
    fv.z_gcn = ad::gcn_forward(t, g_norm, z0, gw, gb, cfg.dropout, true, opts.training, rng);
    const T a = static_cast<T>(cfg.alpha);
    fv.z_out = ad::add(t, ad::scale(t, fv.z_attn, T(1) - a), ad::scale(t, fv.z_gcn, a));
    ad::Var z = fv.z_out;
    if (drop) {
        z = ad::dropout(t, z, cfg.dropout, *rng);
    }
    fv.logits = ad::linear(t, z, w_out, b_out);
    return fv;
}

template <typename T>
Matrix<T> predict(const SgformerParams<T>& p, const SparseGraph& g_norm, const Matrix<T>& x,
                  const ForwardOptions& opts) {
    ForwardOptions o = opts;
    o.training = false;
    ad::Tape<T> t;
    const auto fv = forward(t, p, g_norm, x, o, nullptr, false);
    return t.value(fv.logits);
}

std::vector<std::vector<NodeId>> random_partition(std::size_t n, std::size_t batch_size,
                                                  std::mt19937_64& rng) {
    if (batch_size == 0) {
        throw ConfigError("partition: batch size must be >= 1");
    }
    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), NodeId{0});
    // Fisher-Yates with an explicit draw order (std::shuffle is not
    // specified identically across standard libraries).
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        std::swap(perm[i - 1], perm[j]);
    }
    std::vector<std::vector<NodeId>> out;
    for (std::size_t s = 0; s < n; s += batch_size) {
        const std::size_t e = std::min(n, s + batch_size);
        std::vector<NodeId> b(perm.begin() + static_cast<std::ptrdiff_t>(s),
                              perm.begin() + static_cast<std::ptrdiff_t>(e));
        std::sort(b.begin(), b.end());
        out.push_back(std::move(b));
    }
    return out;
}

template <typename T>
Matrix<T> predict_full_graph(const SgformerParams<T>& p, const NodeDataset& ds,
                             std::optional<std::size_t> batch_size, std::uint64_t seed,
                             const ForwardOptions& opts) {
    const std::size_t n = ds.num_nodes();
    if (!batch_size) {
        return predict(p, normalize_gcn(ds.graph), Matrix<T>::cast_from(ds.features), opts);
    }
    std::mt19937_64 rng(seed);
    Matrix<T> out(n, p.config.out_dim);
    for (const auto& batch : random_partition(n, *batch_size, rng)) {
        const auto g = normalize_gcn(induced_subgraph(ds.graph, batch));
        const auto logits =
            predict(p, g, Matrix<T>::cast_from(gather_rows(ds.features, batch)), opts);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto src = logits.row(i);
            std::copy(src.begin(), src.end(), out.row(static_cast<std::size_t>(batch[i])).begin());
        }
    }
    return out;
}

// ---- checkpoint -------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic{'S', 'G', 'F', '1'};
constexpr std::uint32_t kFlagAttnBias = 1u << 0;
constexpr std::uint32_t kFlagGcnBias = 1u << 1;
constexpr std::uint32_t kFlagAttnDropout = 1u << 2;

template <typename U>
void put_le(std::ostream& os, U v) {
    using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t, std::uint32_t>;
    auto b = std::bit_cast<Bits>(v);
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        buf[i] = static_cast<unsigned char>(b >> (8 * i));
    }
    os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& is, const char* what) {
    using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t, std::uint32_t>;
    unsigned char buf[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) {
        throw FormatError(std::string("checkpoint: truncated while reading ") + what);
    }
    Bits b = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        b |= static_cast<Bits>(buf[i]) << (8 * i);
    }
    return std::bit_cast<U>(b);
}

std::uint32_t task_code(Task t) { return t == Task::Multiclass ? 0u : 1u; }

} // namespace

template <typename T>
void save_checkpoint(const SgformerParams<T>& p, const std::filesystem::path& path) {
    const ModelConfig& c = p.config;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw Error("checkpoint: cannot write " + path.string());
    }
    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(os, kCheckpointVersion);
    for (std::size_t v : {c.in_dim, c.hidden, c.out_dim, c.gcn_depth}) {
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
    }
    put_le<std::uint32_t>(os, task_code(c.task));
    put_le<double>(os, c.alpha);
    std::uint32_t flags = 0;
    flags |= c.attn_bias ? kFlagAttnBias : 0u;
    flags |= c.gcn_bias ? kFlagGcnBias : 0u;
    put_le<std::uint32_t>(os, flags);
    for (const Matrix<T>* m : p.tensors()) {
        put_le<std::uint64_t>(os, m->size());
        for (T v : m->flat()) {
            put_le<float>(os, static_cast<float>(v));
        }
    }
    if (!os) {
        throw Error("checkpoint: write failed for " + path.string());
    }
}

SgformerParams<float> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw DataError("checkpoint: cannot open " + path.string());
    }
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
        throw FormatError("checkpoint: bad magic in " + path.string());
    }
    const auto version = get_le<std::uint32_t>(is, "version");
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    ModelConfig c;
    c.in_dim = get_le<std::uint32_t>(is, "D");
    c.hidden = get_le<std::uint32_t>(is, "d");
    c.out_dim = get_le<std::uint32_t>(is, "C");
    c.gcn_depth = get_le<std::uint32_t>(is, "gcn_depth");
    const auto task = get_le<std::uint32_t>(is, "task");
    if (task > 1) {
        throw FormatError("checkpoint: unknown task code " + std::to_string(task));
    }
    c.task = task == 0 ? Task::Multiclass : Task::Multilabel;
    c.alpha = get_le<double>(is, "alpha");
    const auto flags = get_le<std::uint32_t>(is, "flags");
    if (flags & ~(kFlagAttnBias | kFlagGcnBias | kFlagAttnDropout)) {
        throw FormatError("checkpoint: unknown flag bits");
    }
    c.attn_bias = flags & kFlagAttnBias;
    c.gcn_bias = flags & kFlagGcnBias;
    SgformerParams<float> p;
    try {
        p = shaped_params<float>(c);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: invalid header: ") + e.what());
    }
    const auto names = p.tensor_names();
    auto tensors = p.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto count = get_le<std::uint64_t>(is, "blob size");
        if (count != tensors[i]->size()) {
            throw FormatError("checkpoint: " + names[i] + " has " + std::to_string(count) +
                              " values, header implies " + std::to_string(tensors[i]->size()));
        }
        for (float& v : tensors[i]->flat()) {
            v = get_le<float>(is, names[i].c_str());
        }
    }
    if (is.peek() != std::char_traits<char>::eof()) {
        throw FormatError("checkpoint: trailing bytes after last tensor");
    }
    return p;
}

template struct SgformerParams<float>;
template struct SgformerParams<double>;
template SgformerParams<double> SgformerParams<float>::cast<double>() const;
template SgformerParams<float> SgformerParams<double>::cast<float>() const;
template SgformerParams<float> SgformerParams<float>::cast<float>() const;
template SgformerParams<double> SgformerParams<double>::cast<double>() const;

#define SGF_INSTANTIATE(T)                                                                      \
    template SgformerParams<T> init_params(const ModelConfig&, std::uint64_t);                  \
    template ForwardVars forward(ad::Tape<T>&, const SgformerParams<T>&, const SparseGraph&,    \
                                 const Matrix<T>&, const ForwardOptions&, std::mt19937_64*,     \
                                 bool);                                                         \
    template Matrix<T> predict(const SgformerParams<T>&, const SparseGraph&, const Matrix<T>&, \
                               const ForwardOptions&);                                          \
    template Matrix<T> predict_full_graph(const SgformerParams<T>&, const NodeDataset&,        \
                                          std::optional<std::size_t>, std::uint64_t,            \
                                          const ForwardOptions&);                               \
    template void save_checkpoint(const SgformerParams<T>&, const std::filesystem::path&);

SGF_INSTANTIATE(float)
SGF_INSTANTIATE(double)

#undef SGF_INSTANTIATE

} // namespace sgf
