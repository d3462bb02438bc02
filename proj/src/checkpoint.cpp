#include "itvreg/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace itvreg {

namespace {

constexpr std::array<char, 7> kMagic{'I', 'T', 'V', 'R', 'E', 'G', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::filesystem::path vocab_path_for(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".vocab.tsv";
}

void save_checkpoint(const EmbeddingModel<float>& model, const std::filesystem::path& path) {
  if (!model.vocab) throw Error("model has no vocabulary");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write checkpoint " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, static_cast<std::uint32_t>(model.vocab_size()));
  put_u32(os, static_cast<std::uint32_t>(model.dim()));
  for (Eigen::Index r = 0; r < model.table.rows(); ++r)
    for (Eigen::Index c = 0; c < model.table.cols(); ++c)
      put_u32(os, std::bit_cast<std::uint32_t>(model.table(r, c)));
  if (!os) throw Error("write failed for checkpoint " + path.string());
  model.vocab->save_tsv(vocab_path_for(path));
}

EmbeddingModel<float> load_checkpoint(const std::filesystem::path& path, VocabPtr vocab) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::size_t header = kMagic.size() + 8;
  if (bytes.size() < header) throw Error("checkpoint " + path.string() + " is truncated (no header)");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw Error("checkpoint " + path.string() + " has a bad magic string");
  const auto V = get_u32(bytes.data() + kMagic.size());
  const auto d = get_u32(bytes.data() + kMagic.size() + 4);
  if (!vocab) throw Error("load_checkpoint needs a vocabulary");
  if (V != vocab->size())
    throw Error("checkpoint vocab size " + std::to_string(V) + " does not match vocabulary size " +
                std::to_string(vocab->size()));
  if (d < 2) throw Error("checkpoint dim must be >= 2, got " + std::to_string(d));
  const std::size_t want = header + static_cast<std::size_t>(V) * d * 4;
  if (bytes.size() != want)
    throw Error("checkpoint " + path.string() + " has " + std::to_string(bytes.size()) + " bytes, expected " +
                std::to_string(want) + (bytes.size() < want ? " (truncated)" : " (trailing data)"));
  EmbeddingModel<float> m(std::move(vocab), static_cast<Eigen::Index>(d));
  const unsigned char* p = bytes.data() + header;
  for (Eigen::Index r = 0; r < m.table.rows(); ++r)
    for (Eigen::Index c = 0; c < m.table.cols(); ++c, p += 4) m.table(r, c) = std::bit_cast<float>(get_u32(p));
  if (!m.table.allFinite()) throw Error("checkpoint " + path.string() + " holds non-finite values");
  return m;
}

EmbeddingModel<float> load_checkpoint(const std::filesystem::path& path) {
  auto vocab = std::make_shared<const Vocab>(Vocab::load_tsv(vocab_path_for(path)));
  return load_checkpoint(path, std::move(vocab));
}

}  // namespace itvreg
