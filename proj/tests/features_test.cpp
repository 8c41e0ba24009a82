#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>

#include <unistd.h>

#include "conquer/error.hpp"
#include "conquer/features.hpp"
#include "oracles.hpp"

using namespace conquer;

namespace {

// Byte-level writer that follows the documented layout independently of the
// library encoder.
struct Bytes {
  std::vector<std::uint8_t> b;
  template <class T>
  void put(T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    b.insert(b.end(), raw, raw + sizeof(T));
  }
  void str(const std::string& s) { b.insert(b.end(), s.begin(), s.end()); }
  void header(std::uint32_t count, std::uint32_t dim, std::uint8_t modality = 0,
              const char* magic = "CONQFEAT", std::uint32_t version = 1) {
    b.insert(b.end(), magic, magic + 8);
    put(version);
    put(count);
    put(dim);
    put(modality);
    for (int i = 0; i < 7; ++i) put<std::uint8_t>(0);
  }
};

Bytes one_item_file() {
  Bytes f;
  f.header(1, 4);
  f.put<std::uint16_t>(2);
  f.str("p0");
  f.put<std::uint64_t>(7);
  f.put<std::uint32_t>(0);
  for (float v : {1.0f, 0.0f, 0.0f, 0.0f}) f.put(v);
  return f;
}

Item make_item(std::string id, Eigen::VectorXd g, Eigen::MatrixXd tokens, std::uint64_t label = 0) {
  Item it;
  it.id = std::move(id);
  it.identity_label = label;
  it.global_vec = std::move(g);
  it.local_tokens = std::move(tokens);
  return it;
}

FeatureBundle bundle_of(std::size_t dim, std::vector<Item> items, Modality m = Modality::Image) {
  FeatureBundle b;
  b.modality = m;
  b.dim = dim;
  b.items = std::move(items);
  return b;
}

Eigen::VectorXd vec2(double a, double b) { return (Eigen::VectorXd(2) << a, b).finished(); }

class TempDir : public ::testing::Test {
 protected:
  std::filesystem::path dir;
  void SetUp() override {
    dir = std::filesystem::temp_directory_path() /
          ("conquer_features_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir);
  }
  void TearDown() override { std::filesystem::remove_all(dir); }
};

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Decode, OneItemFixture) {
  const FeatureBundle b = decode_bundle(one_item_file().b);
  ASSERT_EQ(b.items.size(), 1u);
  EXPECT_EQ(b.dim, 4u);
  EXPECT_EQ(b.modality, Modality::Image);
  EXPECT_EQ(b.items[0].id, "p0");
  EXPECT_EQ(b.items[0].identity_label, 7u);
  EXPECT_EQ(b.items[0].local_tokens.cols(), 0);
  EXPECT_EQ(b.items[0].global_vec, (Eigen::VectorXd(4) << 1, 0, 0, 0).finished());
}

TEST(Decode, BadMagic) {
  Bytes f;
  f.header(0, 4, 0, "XXXXXXXX");
  EXPECT_EQ(code_of([&] { decode_bundle(f.b); }), Errc::MalformedHeader);
}

TEST(Decode, BadVersion) {
  Bytes f;
  f.header(0, 4, 0, "CONQFEAT", 2);
  EXPECT_EQ(code_of([&] { decode_bundle(f.b); }), Errc::MalformedHeader);
}

TEST(Decode, BadModality) {
  Bytes f;
  f.header(0, 4, 9);
  EXPECT_EQ(code_of([&] { decode_bundle(f.b); }), Errc::MalformedHeader);
}

TEST(Decode, ShortHeader) {
  std::vector<std::uint8_t> bytes(10, 0);
  EXPECT_EQ(code_of([&] { decode_bundle(bytes); }), Errc::MalformedHeader);
}

TEST(Decode, TruncatedPayload) {
  auto bytes = one_item_file().b;
  bytes.resize(bytes.size() - 3);
  EXPECT_EQ(code_of([&] { decode_bundle(bytes); }), Errc::TruncatedFile);

  Bytes promised_two = one_item_file();
  promised_two.b[12] = 2;  // count field
  EXPECT_EQ(code_of([&] { decode_bundle(promised_two.b); }), Errc::TruncatedFile);
}

TEST(Decode, TrailingBytes) {
  auto bytes = one_item_file().b;
  bytes.push_back(0);
  EXPECT_EQ(code_of([&] { decode_bundle(bytes); }), Errc::TrailingData);
}

TEST(Decode, DuplicateIds) {
  Bytes f;
  f.header(2, 1);
  for (int i = 0; i < 2; ++i) {
    f.put<std::uint16_t>(1);
    f.str("a");
    f.put<std::uint64_t>(0);
    f.put<std::uint32_t>(0);
    f.put(1.0f);
  }
  EXPECT_EQ(code_of([&] { decode_bundle(f.b); }), Errc::DuplicateId);
}

TEST(Encode, MatchesHandBuiltBytes) {
  const FeatureBundle b = bundle_of(
      4, {make_item("p0", (Eigen::VectorXd(4) << 1, 0, 0, 0).finished(), Eigen::MatrixXd(4, 0), 7)});
  EXPECT_EQ(encode_bundle(b), one_item_file().b);
}

TEST(Encode, TokenWidthMismatch) {
  const FeatureBundle b = bundle_of(2, {make_item("a", vec2(1, 0), Eigen::MatrixXd::Ones(3, 1))});
  EXPECT_EQ(code_of([&] { encode_bundle(b); }), Errc::DimensionMismatch);
}

TEST_F(TempDir, EmptyBundleIsHeaderOnly) {
  const auto path = dir / "empty.bin";
  save_bundle(bundle_of(8, {}), path);
  EXPECT_EQ(std::filesystem::file_size(path), kBundleHeaderSize);
  EXPECT_EQ(load_bundle(path), bundle_of(8, {}));
}

TEST_F(TempDir, RoundTripTwoItems) {
  Eigen::MatrixXd tokens(2, 3);
  tokens << 0.5, -1, 2, 0.25, 3, -0.125;
  const FeatureBundle b =
      bundle_of(2,
                {make_item("x", vec2(1, 2), tokens, 4), make_item("y", vec2(-3, 0.5), Eigen::MatrixXd(2, 0), 9)},
                Modality::Text);
  const auto path = dir / "two.bin";
  save_bundle(b, path);
  EXPECT_EQ(load_bundle(path), b);

  // Byte identity of save after load.
  const auto again = dir / "again.bin";
  save_bundle(load_bundle(path), again);
  std::ifstream a(path, std::ios::binary), c(again, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sc((std::istreambuf_iterator<char>(c)), {});
  EXPECT_EQ(sa, sc);
}

TEST_F(TempDir, UnwritablePath) {
  EXPECT_EQ(code_of([&] { save_bundle(bundle_of(2, {}), dir / "missing" / "x.bin"); }),
            Errc::IoFailure);
  EXPECT_EQ(code_of([&] { load_bundle(dir / "absent.bin"); }), Errc::IoFailure);
}

TEST(Normalize, Examples) {
  const auto b = l2_normalize(bundle_of(2, {make_item("a", vec2(3, 4), Eigen::MatrixXd(2, 0))}));
  EXPECT_NEAR(b.items[0].global_vec(0), 0.6, 1e-15);
  EXPECT_NEAR(b.items[0].global_vec(1), 0.8, 1e-15);

  const Eigen::VectorXd unit = vec2(1, 1) / std::sqrt(2.0);
  const auto u = l2_normalize(bundle_of(2, {make_item("a", unit, Eigen::MatrixXd(2, 0))}));
  EXPECT_LE((u.items[0].global_vec - unit).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalize, ZeroVectorNamesItemAndToken) {
  try {
    l2_normalize(bundle_of(2, {make_item("zero", vec2(0, 0), Eigen::MatrixXd(2, 0))}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroVector);
    EXPECT_NE(std::string(e.what()).find("zero"), std::string::npos);
  }
  Eigen::MatrixXd tokens(2, 2);
  tokens << 1, 0, 0, 0;
  try {
    l2_normalize(bundle_of(2, {make_item("t", vec2(1, 0), tokens)}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroVector);
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(GlobalSimilarity, Examples) {
  const auto img = bundle_of(2, {make_item("i", vec2(1, 0), Eigen::MatrixXd(2, 0))});
  const auto txt = bundle_of(2, {make_item("a", vec2(1, 0), Eigen::MatrixXd(2, 0)),
                                 make_item("b", vec2(0, 1), Eigen::MatrixXd(2, 0)),
                                 make_item("c", vec2(1, 1) / std::sqrt(2.0), Eigen::MatrixXd(2, 0))},
                             Modality::Text);
  const SimilarityMatrix s = global_similarity(img, txt);
  EXPECT_EQ(s.kind, SimilarityKind::Global);
  EXPECT_DOUBLE_EQ(s.values(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.values(0, 1), 0.0);
  EXPECT_NEAR(s.values(0, 2), 0.70710678, 1e-8);
}

TEST(GlobalSimilarity, Errors) {
  const auto a = bundle_of(2, {make_item("i", vec2(1, 0), Eigen::MatrixXd(2, 0))});
  const auto b = bundle_of(3, {make_item("j", Eigen::VectorXd::Ones(3), Eigen::MatrixXd(3, 0))});
  EXPECT_EQ(code_of([&] { global_similarity(a, b); }), Errc::DimensionMismatch);
  EXPECT_EQ(code_of([&] { global_similarity(a, bundle_of(2, {})); }), Errc::EmptyBundle);
}

TEST(LocalSimilarity, Examples) {
  Eigen::MatrixXd one(2, 1);
  one << 0.3, -0.7;
  const SimilarityMatrix s = local_similarity(one, one);
  EXPECT_EQ(s.kind, SimilarityKind::Local);
  EXPECT_NEAR(s.values(0, 0), 1.0, 1e-15);

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_EQ(local_similarity(eye, eye).values, eye);
}

TEST(LocalSimilarity, MatchesScalarOracle) {
  oracle::Gen g(3);
  const Eigen::MatrixXd v = g.matrix(5, 3, -1, 1);
  const Eigen::MatrixXd w = g.matrix(5, 2, -1, 1);
  const Eigen::MatrixXd s = local_similarity(v, w).values;
  ASSERT_EQ(s.rows(), 3);
  ASSERT_EQ(s.cols(), 2);
  for (int m = 0; m < 3; ++m)
    for (int n = 0; n < 2; ++n)
      EXPECT_NEAR(s(m, n), oracle::cosine(oracle::column(v, m), oracle::column(w, n)), 1e-12);
}

TEST(LocalSimilarity, Errors) {
  EXPECT_EQ(code_of([&] { local_similarity(Eigen::MatrixXd(2, 0), Eigen::MatrixXd::Ones(2, 1)); }),
            Errc::EmptyTokens);
  EXPECT_EQ(code_of([&] { local_similarity(Eigen::MatrixXd::Ones(2, 1), Eigen::MatrixXd::Ones(3, 1)); }),
            Errc::DimensionMismatch);
}

// Properties over random bundles.

namespace {
FeatureBundle random_bundle(oracle::Gen& g, std::size_t n, std::size_t d, Modality m) {
  std::vector<Item> items;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(g.size(0, 3));
    items.push_back(make_item((m == Modality::Image ? "i" : "t") + std::to_string(i),
                              g.vector(static_cast<Eigen::Index>(d), -2, 2),
                              g.matrix(static_cast<Eigen::Index>(d), k, -2, 2), i));
  }
  return bundle_of(d, std::move(items), m);
}
}  // namespace

TEST(FeatureProperties, NormalizedNormsAndRange) {
  oracle::Gen g(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = g.size(1, 6);
    const auto a = l2_normalize(random_bundle(g, g.size(1, 5), d, Modality::Image));
    const auto b = l2_normalize(random_bundle(g, g.size(1, 5), d, Modality::Text));
    for (const Item& it : a.items) {
      EXPECT_NEAR(it.global_vec.norm(), 1.0, 1e-6);
      for (Eigen::Index c = 0; c < it.local_tokens.cols(); ++c)
        EXPECT_NEAR(it.local_tokens.col(c).norm(), 1.0, 1e-6);
    }
    const Eigen::MatrixXd ab = global_similarity(a, b).values;
    const Eigen::MatrixXd ba = global_similarity(b, a).values;
    EXPECT_LE(ab.cwiseAbs().maxCoeff(), 1.0 + 1e-6);
    EXPECT_LE((ab - ba.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(FeatureProperties, PositiveScalingInvariance) {
  oracle::Gen g(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = g.size(1, 6);
    const auto a = random_bundle(g, g.size(1, 5), d, Modality::Image);
    const auto b = random_bundle(g, g.size(1, 5), d, Modality::Text);
    auto scaled = a;
    for (Item& it : scaled.items) {
      it.global_vec *= g.uniform(0.01, 100);
      it.local_tokens *= g.uniform(0.01, 100);
    }
    const Eigen::MatrixXd s0 = global_similarity(l2_normalize(a), l2_normalize(b)).values;
    const Eigen::MatrixXd s1 = global_similarity(l2_normalize(scaled), l2_normalize(b)).values;
    EXPECT_LE((s0 - s1).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(FeatureProperties, EncodeDecodeIsIdentityOnBytes) {
  oracle::Gen g(13);
  for (int trial = 0; trial < 30; ++trial) {
    const auto bytes = encode_bundle(random_bundle(g, g.size(0, 4), g.size(1, 5), Modality::Text));
    EXPECT_EQ(encode_bundle(decode_bundle(bytes)), bytes);
  }
}
