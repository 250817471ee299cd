#include "eqsearch/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "eqsearch/error.hpp"

namespace eqsearch {

namespace {

constexpr char kMagic[8] = {'E', 'Q', 'C', 'K', 'P', 'T', '0', '1'};
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw InvalidArgument("truncated checkpoint");
    return v;
}

}  // namespace

const char* similarity_name(Similarity s) {
    return s == Similarity::InnerProduct ? "inner_product" : "cosine";
}

Similarity parse_similarity(const std::string& name) {
    if (name == "inner_product") return Similarity::InnerProduct;
    if (name == "cosine") return Similarity::Cosine;
    throw InvalidArgument("unknown similarity '" + name + "'");
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    auto& params = const_cast<ModelParams<float>&>(checkpoint.params);
    nlohmann::json tensors = nlohmann::json::array();
    params.for_each_tensor([&](const char* name, float*, Eigen::Index n) {
        tensors.push_back({{"name", name}, {"size", n}});
    });
    nlohmann::json header = {
        {"version", kFormatVersion},
        {"vocabulary", nlohmann::json::parse(checkpoint.vocab.to_json())},
        {"vocabulary_hash", checkpoint.vocab.hash()},
        {"similarity", similarity_name(checkpoint.similarity)},
        {"bn_placement", bn_placement_name(checkpoint.params.bn_placement)},
        {"tensors", tensors},
    };
    std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    write_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    params.for_each_tensor([&](const char*, float* data, Eigen::Index n) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
    });
    if (!out) throw InvalidArgument("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary* expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw InvalidArgument(path.string() + " is not a checkpoint");
    std::uint64_t len = read_u64(in);
    if (len > (1u << 30)) throw InvalidArgument("corrupt checkpoint header");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw InvalidArgument("truncated checkpoint");

    Checkpoint ck;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
        if (header.at("version").get<int>() != kFormatVersion) throw InvalidArgument("unsupported checkpoint version");
        ck.vocab = Vocabulary::from_json(header.at("vocabulary").dump());
        if (ck.vocab.hash() != header.at("vocabulary_hash").get<std::string>())
            throw InvalidArgument("checkpoint vocabulary does not match its stored hash");
        ck.similarity = parse_similarity(header.at("similarity").get<std::string>());
        ck.params = ModelParams<float>::zeros();
        ck.params.bn_placement = parse_bn_placement(header.at("bn_placement").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("bad checkpoint header: ") + e.what());
    }
    if (expected && expected->hash() != ck.vocab.hash())
        throw VocabularyMismatch("checkpoint was trained on vocabulary " + ck.vocab.hash() + ", got " + expected->hash());

    const auto& table = header.at("tensors");
    std::size_t k = 0;
    ck.params.for_each_tensor([&](const char* name, float* data, Eigen::Index n) {
        if (k >= table.size() || table[k].at("name").get<std::string>() != name ||
            table[k].at("size").get<Eigen::Index>() != n)
            throw InvalidArgument(std::string("checkpoint tensor table mismatch at ") + name);
        in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
        if (!in) throw InvalidArgument("truncated checkpoint data");
        ++k;
    });
    if (k != table.size()) throw InvalidArgument("checkpoint holds unexpected tensors");
    return ck;
}

std::string model_hash(const Checkpoint& checkpoint) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    std::string vh = checkpoint.vocab.hash();
    mix(vh.data(), vh.size());
    mix(similarity_name(checkpoint.similarity), std::strlen(similarity_name(checkpoint.similarity)));
    const_cast<ModelParams<float>&>(checkpoint.params).for_each_tensor([&](const char*, float* data, Eigen::Index n) {
        mix(data, static_cast<std::size_t>(n) * sizeof(float));
    });
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace eqsearch
