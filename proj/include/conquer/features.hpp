#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace conquer {

enum class Modality : std::uint8_t { Image = 0, Text = 1 };

/// One image or caption: a global embedding plus its (possibly empty)
/// set of local token embeddings stored as the columns of a d x K matrix.
struct Item {
  std::string id;
  std::uint64_t identity_label = 0;
  Eigen::VectorXd global_vec;
  Eigen::MatrixXd local_tokens;

  bool operator==(const Item& other) const;
};

/// All items of a single modality sharing one embedding dimension.
struct FeatureBundle {
  Modality modality = Modality::Image;
  std::size_t dim = 0;
  std::vector<Item> items;

  /// Throws DimensionMismatch or DuplicateId when the bundle is inconsistent.
  void validate() const;

  bool operator==(const FeatureBundle& other) const = default;
};

enum class SimilarityKind { Global, Local };

struct SimilarityMatrix {
  Eigen::MatrixXd values;
  SimilarityKind kind = SimilarityKind::Global;
  std::string row_source;
  std::string col_source;
};

// Binary bundle format. All integers are little-endian.
//
//   "CONQFEAT" | u32 version | u32 item_count | u32 dim | u8 modality | 7 x 0x00
//   per item:  u16 id_length | id bytes | u64 identity_label | u32 token_count
//              | dim x f32 global | token_count x dim x f32 (column-major by token)
inline constexpr char kBundleMagic[8] = {'C', 'O', 'N', 'Q', 'F', 'E', 'A', 'T'};
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::size_t kBundleHeaderSize = 28;

/// Reads a bundle exactly as stored (binary32 widened to double, no normalization).
FeatureBundle load_bundle(const std::filesystem::path& path);

FeatureBundle decode_bundle(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_bundle(const FeatureBundle& bundle);

/// Values are narrowed to binary32 on write.
void save_bundle(const FeatureBundle& bundle, const std::filesystem::path& path);

/// Rescales every global vector and token column to unit Euclidean norm.
/// Vectors with norm below 1e-12 raise ZeroVector naming the item and token
/// (token -1 denotes the global vector).
FeatureBundle l2_normalize(const FeatureBundle& bundle);

inline constexpr double kZeroNormThreshold = 1e-12;

/// Cosine similarity between every image global vector (rows) and every text
/// global vector (columns).
SimilarityMatrix global_similarity(const FeatureBundle& images,
                                   const FeatureBundle& texts);

/// Cosine similarity between image tokens (d x M) and text tokens (d x N).
SimilarityMatrix local_similarity(const Eigen::MatrixXd& image_tokens,
                                  const Eigen::MatrixXd& text_tokens);

}  // namespace conquer
