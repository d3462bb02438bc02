#pragma once

#include <filesystem>

#include "itvreg/encoder.hpp"

namespace itvreg {

/// Binary layout: the 7-byte magic "ITVREG1", int32 vocab size, int32 dim
/// (little endian), then V*d little-endian float32 values row-major. The
/// vocabulary is written next to it as `<path>.vocab.tsv`.
void save_checkpoint(const EmbeddingModel<float>& model, const std::filesystem::path& path);

/// Loads the table and checks its row count against `vocab`.
EmbeddingModel<float> load_checkpoint(const std::filesystem::path& path, VocabPtr vocab);

/// Loads using the sidecar vocabulary file.
EmbeddingModel<float> load_checkpoint(const std::filesystem::path& path);

std::filesystem::path vocab_path_for(const std::filesystem::path& checkpoint);

}  // namespace itvreg
