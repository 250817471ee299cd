#pragma once

#include <filesystem>
#include <string>

#include "eqsearch/model_params.hpp"
#include "eqsearch/vocabulary.hpp"

namespace eqsearch {

enum class Similarity { InnerProduct, Cosine };

const char* similarity_name(Similarity s);
Similarity parse_similarity(const std::string& name);

struct Checkpoint {
    ModelParams<float> params;
    Vocabulary vocab;
    // Cosine after contrastive finetuning (embeddings are unit-normalized).
    Similarity similarity = Similarity::InnerProduct;
};

// Binary container: magic, a JSON header (vocabulary, its hash, tensor
// table) and little-endian float32 tensor data.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

// Throws VocabularyMismatch when `expected` is given and its hash differs
// from the one the checkpoint was trained against.
Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary* expected = nullptr);

// Hash identifying a checkpoint's weights, stored alongside embeddings.
std::string model_hash(const Checkpoint& checkpoint);

}  // namespace eqsearch
