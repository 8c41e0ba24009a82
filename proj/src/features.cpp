#include "conquer/features.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_set>

#include "conquer/error.hpp"

namespace conquer {

static_assert(std::endian::native == std::endian::little,
              "bundle codec assumes a little-endian host");
static_assert(std::numeric_limits<float>::is_iec559);

namespace {

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out_.insert(out_.end(), p, p + sizeof(T));
  }

  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }

  const std::uint8_t* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      fail(Errc::TruncatedFile, "bundle payload ends at byte " +
                                    std::to_string(bytes_.size()) +
                                    " but more data was expected");
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

void put_vector(Writer& w, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) w.put(static_cast<float>(data[i]));
}

void get_vector(Reader& r, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<double>(r.get<float>());
}

double cosine(const Eigen::Ref<const Eigen::VectorXd>& a,
              const Eigen::Ref<const Eigen::VectorXd>& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

Eigen::VectorXd inverse_norms(const Eigen::MatrixXd& columns, const char* what) {
  Eigen::VectorXd inv(columns.cols());
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    const double n = columns.col(j).norm();
    if (!(n >= kZeroNormThreshold)) {
      fail(Errc::ZeroVector, std::string(what) + " column " + std::to_string(j) +
                                 " has zero norm");
    }
    inv(j) = 1.0 / n;
  }
  return inv;
}

}  // namespace

bool Item::operator==(const Item& other) const {
  return id == other.id && identity_label == other.identity_label &&
         global_vec.size() == other.global_vec.size() &&
         global_vec == other.global_vec &&
         local_tokens.rows() == other.local_tokens.rows() &&
         local_tokens.cols() == other.local_tokens.cols() &&
         local_tokens == other.local_tokens;
}

void FeatureBundle::validate() const {
  std::unordered_set<std::string> seen;
  for (const Item& item : items) {
    if (static_cast<std::size_t>(item.global_vec.size()) != dim) {
      fail(Errc::DimensionMismatch, "item '" + item.id + "' global vector has length " +
                                        std::to_string(item.global_vec.size()) +
                                        ", bundle dim is " + std::to_string(dim));
    }
    if (item.local_tokens.cols() > 0 &&
        static_cast<std::size_t>(item.local_tokens.rows()) != dim) {
      fail(Errc::DimensionMismatch, "item '" + item.id + "' token matrix has width " +
                                        std::to_string(item.local_tokens.rows()) +
                                        ", bundle dim is " + std::to_string(dim));
    }
    if (!seen.insert(item.id).second) {
      fail(Errc::DuplicateId, "duplicate item id '" + item.id + "'");
    }
  }
}

std::vector<std::uint8_t> encode_bundle(const FeatureBundle& bundle) {
  bundle.validate();
  if (bundle.items.size() > std::numeric_limits<std::uint32_t>::max() ||
      bundle.dim > std::numeric_limits<std::uint32_t>::max()) {
    fail(Errc::InvalidArgument, "bundle too large for the u32 header fields");
  }
  Writer w;
  w.put_bytes(kBundleMagic, sizeof(kBundleMagic));
  w.put<std::uint32_t>(kBundleVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(bundle.items.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(bundle.dim));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(bundle.modality));
  const std::uint8_t pad[7] = {};
  w.put_bytes(pad, sizeof(pad));

  for (const Item& item : bundle.items) {
    if (item.id.size() > std::numeric_limits<std::uint16_t>::max()) {
      fail(Errc::InvalidArgument, "item id longer than 65535 bytes");
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(item.id.size()));
    w.put_bytes(item.id.data(), item.id.size());
    w.put<std::uint64_t>(item.identity_label);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(item.local_tokens.cols()));
    put_vector(w, item.global_vec.data(), bundle.dim);
    // Eigen stores column-major, which is the on-disk token order.
    put_vector(w, item.local_tokens.data(),
               static_cast<std::size_t>(item.local_tokens.cols()) * bundle.dim);
  }
  return w.take();
}

FeatureBundle decode_bundle(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kBundleHeaderSize) {
    fail(Errc::MalformedHeader, "file shorter than the 28-byte header");
  }
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof(kBundleMagic)), kBundleMagic, sizeof(kBundleMagic)) != 0) {
    fail(Errc::MalformedHeader, "bad magic bytes");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kBundleVersion) {
    fail(Errc::MalformedHeader, "unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  const auto modality = r.get<std::uint8_t>();
  if (modality > 1) {
    fail(Errc::MalformedHeader, "unknown modality " + std::to_string(modality));
  }
  r.take(7);

  FeatureBundle bundle;
  bundle.modality = static_cast<Modality>(modality);
  bundle.dim = dim;
  for (std::uint32_t i = 0; i < count; ++i) {
    Item item;
    const auto id_len = r.get<std::uint16_t>();
    const auto* id = r.take(id_len);
    item.id.assign(reinterpret_cast<const char*>(id), id_len);
    item.identity_label = r.get<std::uint64_t>();
    const auto tokens = r.get<std::uint32_t>();
    item.global_vec.resize(dim);
    get_vector(r, item.global_vec.data(), dim);
    item.local_tokens.resize(dim, tokens);
    get_vector(r, item.local_tokens.data(), static_cast<std::size_t>(dim) * tokens);
    bundle.items.push_back(std::move(item));
  }
  if (r.remaining() != 0) {
    fail(Errc::TrailingData,
         std::to_string(r.remaining()) + " unexpected bytes after the last item");
  }
  bundle.validate();
  return bundle;
}

FeatureBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoFailure, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(Errc::IoFailure, "read error on '" + path.string() + "'");
  return decode_bundle(bytes);
}

void save_bundle(const FeatureBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = encode_bundle(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(Errc::IoFailure, "write error on '" + path.string() + "'");
}

FeatureBundle l2_normalize(const FeatureBundle& bundle) {
  FeatureBundle out = bundle;
  for (Item& item : out.items) {
    const double g = item.global_vec.norm();
    if (!(g >= kZeroNormThreshold)) {
      fail(Errc::ZeroVector, "item '" + item.id + "' token -1 (global) has zero norm");
    }
    item.global_vec /= g;
    for (Eigen::Index t = 0; t < item.local_tokens.cols(); ++t) {
      const double n = item.local_tokens.col(t).norm();
      if (!(n >= kZeroNormThreshold)) {
        fail(Errc::ZeroVector, "item '" + item.id + "' token " + std::to_string(t) +
                                   " has zero norm");
      }
      item.local_tokens.col(t) /= n;
    }
  }
  return out;
}

SimilarityMatrix global_similarity(const FeatureBundle& images,
                                   const FeatureBundle& texts) {
  if (images.items.empty() || texts.items.empty()) {
    fail(Errc::EmptyBundle, "global_similarity needs nonempty bundles");
  }
  if (images.dim != texts.dim) {
    fail(Errc::DimensionMismatch, "bundle dims differ: " + std::to_string(images.dim) +
                                      " vs " + std::to_string(texts.dim));
  }
  SimilarityMatrix s;
  s.kind = SimilarityKind::Global;
  s.row_source = "global:" + std::string(images.modality == Modality::Image ? "image" : "text");
  s.col_source = "global:" + std::string(texts.modality == Modality::Image ? "image" : "text");
  s.values.resize(static_cast<Eigen::Index>(images.items.size()),
                  static_cast<Eigen::Index>(texts.items.size()));
  for (std::size_t i = 0; i < images.items.size(); ++i) {
    for (std::size_t j = 0; j < texts.items.size(); ++j) {
      const auto& a = images.items[i].global_vec;
      const auto& b = texts.items[j].global_vec;
      if (a.norm() < kZeroNormThreshold || b.norm() < kZeroNormThreshold) {
        fail(Errc::ZeroVector, "zero global vector in similarity input");
      }
      s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cosine(a, b);
    }
  }
  return s;
}

SimilarityMatrix local_similarity(const Eigen::MatrixXd& image_tokens,
                                  const Eigen::MatrixXd& text_tokens) {
  if (image_tokens.cols() == 0 || text_tokens.cols() == 0) {
    fail(Errc::EmptyTokens, "local_similarity needs at least one token per side");
  }
  if (image_tokens.rows() != text_tokens.rows()) {
    fail(Errc::DimensionMismatch, "token dims differ: " +
                                      std::to_string(image_tokens.rows()) + " vs " +
                                      std::to_string(text_tokens.rows()));
  }
  const Eigen::VectorXd inv_v = inverse_norms(image_tokens, "image token");
  const Eigen::VectorXd inv_w = inverse_norms(text_tokens, "text token");
  SimilarityMatrix s;
  s.kind = SimilarityKind::Local;
  s.row_source = "local:image";
  s.col_source = "local:text";
  s.values = inv_v.asDiagonal() * (image_tokens.transpose() * text_tokens) *
             inv_w.asDiagonal();
  return s;
}

}  // namespace conquer
