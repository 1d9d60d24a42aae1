#include <gtest/gtest.h>

#include <cstring>
#include <limits>

#include "json.hpp"
#include "sefa/archive.hpp"
#include "sefa/manifest.hpp"
#include "sefa/npy.hpp"
#include "support.hpp"

using sefa::ErrorCode;
using sefa::LayerSelection;
using sefa::Matrix;
using sefa::Rng;
using sefa::Vector;
using support::code_of;
using support::TempDir;

namespace {

// numpy.save of np.array([[1.5, -2.0]], dtype='<f4').
constexpr std::string_view kNumpyFloat32Hex =
    "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a2046616c73"
    "652c20277368617065273a2028312c2032292c207d202020202020202020202020202020202020202020202020202020"
    "202020202020202020202020202020202020202020202020202020202020200a0000c03f000000c0";

std::string npy_with_header(const std::string& dict) {
  std::string text = dict;
  const std::size_t unpadded = 10 + text.size() + 1;
  text.append((64 - unpadded % 64) % 64, ' ');
  text.push_back('\n');
  std::string out("\x93NUMPY\x01\x00", 8);
  out.push_back(static_cast<char>(text.size() & 0xff));
  out.push_back(static_cast<char>(text.size() >> 8));
  return out + text;
}

void write_layer(const std::filesystem::path& path, std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  sefa::npy::save_matrix(Matrix::gaussian(rows, cols, rng), path);
}

void write_manifest(const std::filesystem::path& path, const nlohmann::json& doc) {
  sefa::io::write_atomically(path, doc.dump());
}

}  // namespace

TEST(Npy, ReadsNumpyFloat32File) {
  const Matrix m = sefa::npy::to_matrix(sefa::npy::decode(support::from_hex(kNumpyFloat32Hex)), "fixture");
  EXPECT_EQ(m, (Matrix{{1.5, -2.0}}));
}

TEST(Npy, Float32IsWidenedExactly) {
  const float f = 0.1f;
  const Matrix m{{static_cast<double>(f)}};
  TempDir dir("npy_widen");
  sefa::npy::save_matrix(m, dir / "m.npy", sefa::npy::Dtype::Float32);
  const Matrix back = sefa::npy::load_matrix(dir / "m.npy");
  EXPECT_EQ(back(0, 0), static_cast<double>(f));
}

TEST(Npy, RoundTripIsBitExact) {
  TempDir dir("npy_roundtrip");
  Rng rng(8);
  Matrix m = Matrix::gaussian(7, 5, rng);
  m(0, 0) = std::numeric_limits<double>::denorm_min();
  m(1, 1) = -0.0;
  m(2, 2) = std::numeric_limits<double>::max();
  sefa::npy::save_matrix(m, dir / "m.npy");
  const Matrix back = sefa::npy::load_matrix(dir / "m.npy");
  ASSERT_EQ(back.rows(), 7u);
  ASSERT_EQ(back.cols(), 5u);
  EXPECT_EQ(std::memcmp(back.values().data(), m.values().data(), m.values().size() * sizeof(double)), 0);
}

TEST(Npy, HeaderIsAlignedAndParsableByNumpyConventions) {
  const std::string bytes = sefa::npy::encode_matrix(Matrix{{1, 2, 3}});
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
  EXPECT_EQ((10 + header_len) % 64, 0u);
  EXPECT_EQ(bytes[10 + header_len - 1], '\n');
  EXPECT_NE(bytes.find("'descr': '<f8'"), std::string::npos);
  EXPECT_NE(bytes.find("'shape': (1, 3)"), std::string::npos);
}

TEST(Npy, ThreeDimensionalTensorIsRejected) {
  const std::vector<double> data(8, 1.0);
  const std::string bytes = sefa::npy::encode({sefa::npy::Dtype::Float64, false, {2, 2, 2}}, data);
  EXPECT_EQ(code_of([&] { sefa::npy::to_matrix(sefa::npy::decode(bytes), "x"); }), ErrorCode::NotTwoDimensional);
}

TEST(Npy, BadMagic) {
  std::string bytes = sefa::npy::encode_matrix(Matrix{{1}});
  bytes[1] = 'X';
  EXPECT_EQ(code_of([&] { sefa::npy::decode(bytes); }), ErrorCode::BadMagic);
  EXPECT_EQ(code_of([&] { sefa::npy::decode("nope"); }), ErrorCode::BadMagic);
}

TEST(Npy, UnsupportedVersionIsBadMagic) {
  std::string bytes = sefa::npy::encode_matrix(Matrix{{1}});
  bytes[6] = '\x02';
  EXPECT_EQ(code_of([&] { sefa::npy::decode(bytes); }), ErrorCode::BadMagic);
}

TEST(Npy, UnsupportedDtypes) {
  for (const char* descr : {"<i4", ">f8", "<f2", "|u1"}) {
    const std::string bytes = npy_with_header(std::string("{'descr': '") + descr +
                                              "', 'fortran_order': False, 'shape': (1, 1), }") +
                              std::string(8, '\0');
    EXPECT_EQ(code_of([&] { sefa::npy::decode(bytes); }), ErrorCode::UnsupportedDtype) << descr;
  }
  const std::string fortran =
      npy_with_header("{'descr': '<f8', 'fortran_order': True, 'shape': (1, 1), }") + std::string(8, '\0');
  EXPECT_EQ(code_of([&] { sefa::npy::decode(fortran); }), ErrorCode::UnsupportedDtype);
}

TEST(Npy, TruncatedPayload) {
  std::string bytes = sefa::npy::encode_matrix(Matrix{{1, 2}, {3, 4}});
  bytes.resize(bytes.size() - 3);
  EXPECT_EQ(code_of([&] { sefa::npy::decode(bytes); }), ErrorCode::TruncatedFile);
  EXPECT_EQ(code_of([&] { sefa::npy::decode(bytes.substr(0, 9)); }), ErrorCode::TruncatedFile);
}

TEST(Npy, MissingFileIsIoFailure) {
  EXPECT_EQ(code_of([] { sefa::npy::load_matrix("/nonexistent/m.npy"); }), ErrorCode::IoFailure);
}

TEST(Npy, SaveOverwritesWithoutLeavingTemporaries) {
  TempDir dir("npy_overwrite");
  sefa::npy::save_matrix(Matrix{{1}}, dir / "m.npy");
  sefa::npy::save_matrix(Matrix{{2, 3}}, dir / "m.npy");
  EXPECT_EQ(sefa::npy::load_matrix(dir / "m.npy"), (Matrix{{2, 3}}));
  EXPECT_FALSE(std::filesystem::exists(dir / "m.npy.tmp"));
}

TEST(NpyProperty, RoundTripForRandomShapes) {
  TempDir dir("npy_property");
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const std::size_t rows = 1 + static_cast<std::size_t>(rng.uniform() * 30);
    const std::size_t cols = 1 + static_cast<std::size_t>(rng.uniform() * 30);
    Matrix m = Matrix::gaussian(rows, cols, rng);
    m *= std::exp(rng.uniform(-300.0, 300.0));
    sefa::npy::save_matrix(m, dir / "p.npy");
    EXPECT_EQ(sefa::npy::load_matrix(dir / "p.npy"), m) << "seed " << seed;
  }
}

TEST(Selection, ParsesRanges) {
  EXPECT_EQ(LayerSelection::parse("6-").resolve(14),
            (std::vector<std::size_t>{6, 7, 8, 9, 10, 11, 12, 13}));
  EXPECT_EQ(LayerSelection::parse("0-1").resolve(14), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(LayerSelection::parse("2-5").resolve(14), (std::vector<std::size_t>{2, 3, 4, 5}));
  EXPECT_EQ(LayerSelection::parse("6-,0-1").resolve(8), (std::vector<std::size_t>{0, 1, 6, 7}));
  EXPECT_EQ(LayerSelection::parse("3").resolve(4), (std::vector<std::size_t>{3}));
  EXPECT_EQ(LayerSelection::parse("0-1,6-").to_string(), "0-1,6-");
}

TEST(Selection, RejectsMalformedText) {
  for (const char* text : {"", "9-3", "a-b", "1,,2", "-3", "0-2,1-4", "2-,5", " 1", "1-2-3"}) {
    EXPECT_EQ(code_of([&] { LayerSelection::parse(text); }), ErrorCode::InvalidSelection) << text;
  }
}

TEST(Selection, RejectsOutOfBounds) {
  EXPECT_EQ(code_of([] { LayerSelection::parse("0-14").resolve(14); }), ErrorCode::InvalidSelection);
  EXPECT_EQ(code_of([] { LayerSelection::parse("14-").resolve(14); }), ErrorCode::InvalidSelection);
}

class ManifestTest : public ::testing::Test {
 protected:
  TempDir dir{"manifest"};
};

TEST_F(ManifestTest, AcceptsPgganWithOneLayer) {
  write_layer(dir / "w.npy", 8192, 512, 1);
  write_manifest(dir / "m.json", {{"family", "pggan"},
                                  {"latent_dim", 512},
                                  {"layers", {{{"name", "fc"}, {"tensor_path", "w.npy"}, {"rows", 8192}}}}});
  const auto m = sefa::load_manifest(dir / "m.json");
  EXPECT_EQ(m.family, sefa::Family::Pggan);
  EXPECT_EQ(m.latent_dim, 512u);
  ASSERT_EQ(m.layers.size(), 1u);
  EXPECT_EQ(m.layers[0].rows, 8192u);
}

TEST_F(ManifestTest, InconsistentLatentDims) {
  write_layer(dir / "a.npy", 4, 256, 1);
  write_layer(dir / "b.npy", 4, 512, 2);
  write_manifest(dir / "m.json", {{"family", "stylegan"},
                                  {"latent_dim", 512},
                                  {"layers",
                                   {{{"name", "a"}, {"tensor_path", "a.npy"}, {"rows", 4}},
                                    {{"name", "b"}, {"tensor_path", "b.npy"}, {"rows", 4}}}}});
  EXPECT_EQ(code_of([&] { sefa::load_manifest(dir / "m.json"); }), ErrorCode::LatentDimInconsistent);
}

TEST_F(ManifestTest, MissingTensor) {
  write_manifest(dir / "m.json", {{"family", "pggan"},
                                  {"latent_dim", 3},
                                  {"layers", {{{"name", "fc"}, {"tensor_path", "gone.npy"}, {"rows", 2}}}}});
  EXPECT_EQ(code_of([&] { sefa::load_manifest(dir / "m.json"); }), ErrorCode::MissingTensor);
}

TEST_F(ManifestTest, RowCountMismatch) {
  write_layer(dir / "a.npy", 5, 3, 1);
  write_manifest(dir / "m.json", {{"family", "pggan"},
                                  {"latent_dim", 3},
                                  {"layers", {{{"name", "fc"}, {"tensor_path", "a.npy"}, {"rows", 4}}}}});
  EXPECT_EQ(code_of([&] { sefa::load_manifest(dir / "m.json"); }), ErrorCode::ShapeMismatch);
}

TEST_F(ManifestTest, BiasLengthMismatch) {
  write_layer(dir / "a.npy", 4, 3, 1);
  sefa::npy::save_vector(Vector{1, 2, 3}, dir / "b.npy");
  write_manifest(dir / "m.json",
                 {{"family", "pggan"},
                  {"latent_dim", 3},
                  {"layers", {{{"name", "fc"}, {"tensor_path", "a.npy"}, {"rows", 4}, {"bias_path", "b.npy"}}}}});
  EXPECT_EQ(code_of([&] { sefa::load_manifest(dir / "m.json"); }), ErrorCode::ShapeMismatch);
}

TEST_F(ManifestTest, SchemaViolations) {
  write_layer(dir / "a.npy", 4, 3, 1);
  const nlohmann::json layer = {{"name", "fc"}, {"tensor_path", "a.npy"}, {"rows", 4}};
  const std::vector<nlohmann::json> bad = {
      nlohmann::json::array(),
      {{"latent_dim", 3}, {"layers", {layer}}},
      {{"family", "vae"}, {"latent_dim", 3}, {"layers", {layer}}},
      {{"family", "pggan"}, {"latent_dim", -3}, {"layers", {layer}}},
      {{"family", "pggan"}, {"latent_dim", 3}, {"layers", nlohmann::json::array()}},
      {{"family", "pggan"}, {"latent_dim", 3}, {"layers", {layer, layer}}},
      {{"family", "stylegan"}, {"latent_dim", 3}, {"layers", {layer, layer}}},
      {{"family", "biggan"}, {"latent_dim", 3}, {"layers", {layer}}},
      {{"family", "pggan"}, {"latent_dim", 3}, {"layers", {{{"name", "fc"}, {"rows", 4}}}}},
      {{"family", "pggan"}, {"latent_dim", 3}, {"layers", {layer}}, {"notes", 5}},
  };
  for (const auto& doc : bad) {
    write_manifest(dir / "m.json", doc);
    EXPECT_EQ(code_of([&] { sefa::load_manifest(dir / "m.json"); }), ErrorCode::SchemaViolation) << doc.dump();
  }
  sefa::io::write_atomically(dir / "m.json", "{not json");
  EXPECT_EQ(code_of([&] { sefa::load_manifest(dir / "m.json"); }), ErrorCode::SchemaViolation);
}

TEST_F(ManifestTest, TransposedStorageIsReoriented) {
  Rng rng(4);
  const Matrix a = Matrix::gaussian(6, 3, rng);
  sefa::npy::save_matrix(a.transposed(), dir / "at.npy");
  write_manifest(dir / "m.json",
                 {{"family", "pggan"},
                  {"latent_dim", 3},
                  {"layers", {{{"name", "fc"}, {"tensor_path", "at.npy"}, {"rows", 6}, {"transpose", true}}}}});
  const auto m = sefa::load_manifest(dir / "m.json");
  EXPECT_EQ(sefa::load_layer(m, 0).a, a);
}

TEST_F(ManifestTest, SelectLayersKeepsOrderAndFullRangeLoadsEachOnce) {
  nlohmann::json layers = nlohmann::json::array();
  for (int i = 0; i < 5; ++i) {
    const std::string file = "l" + std::to_string(i) + ".npy";
    write_layer(dir / file, 2 + i, 4, static_cast<std::uint64_t>(i));
    layers.push_back({{"name", "layer" + std::to_string(i)}, {"tensor_path", file}, {"rows", 2 + i}});
  }
  write_manifest(dir / "m.json", {{"family", "stylegan"}, {"latent_dim", 4}, {"layers", layers}});
  const auto m = sefa::load_manifest(dir / "m.json");

  const auto all = sefa::select_layers(m, LayerSelection::all());
  ASSERT_EQ(all.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(all[i].name, "layer" + std::to_string(i));
    EXPECT_EQ(all[i].a.rows(), 2 + i);
  }
  const auto some = sefa::select_layers(m, LayerSelection::parse("3-,1"));
  ASSERT_EQ(some.size(), 3u);
  EXPECT_EQ(some[0].name, "layer1");
  EXPECT_EQ(some[1].name, "layer3");
  EXPECT_EQ(some[2].name, "layer4");
}

TEST_F(ManifestTest, JsonRoundTrip) {
  write_layer(dir / "a.npy", 4, 3, 1);
  sefa::npy::save_vector(Vector{1, 2, 3, 4}, dir / "b.npy");
  const nlohmann::json doc = {
      {"family", "pggan"},
      {"latent_dim", 3},
      {"layers", {{{"name", "fc"}, {"tensor_path", "a.npy"}, {"rows", 4}, {"bias_path", "b.npy"}}}},
      {"notes", "hello"}};
  write_manifest(dir / "m.json", doc);
  EXPECT_EQ(sefa::manifest_to_json(sefa::load_manifest(dir / "m.json")), doc);
  EXPECT_EQ(sefa::load_layer(sefa::load_manifest(dir / "m.json"), 0).bias, (Vector{1, 2, 3, 4}));
}

TEST(Archive, RoundTripAndCrcCheck) {
  const std::vector<sefa::archive::Member> members = {{"a.txt", "hello"}, {"b.bin", std::string("\0\1\2", 3)}};
  const std::string zip = sefa::archive::write_zip(members);
  const auto back = sefa::archive::read_zip(zip);
  EXPECT_EQ(back.at("a.txt"), "hello");
  EXPECT_EQ(back.at("b.bin"), std::string("\0\1\2", 3));
  EXPECT_EQ(sefa::archive::write_zip(members), zip);

  std::string corrupt = zip;
  corrupt[30 + 5] = 'j';  // first byte of "hello"
  EXPECT_EQ(code_of([&] { sefa::archive::read_zip(corrupt); }), ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { sefa::archive::read_zip("PK"); }), ErrorCode::SchemaViolation);
}
