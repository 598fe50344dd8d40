#include <gtest/gtest.h>

#include <random>

#include "support/tempdir.hpp"
#include "surface/error.hpp"
#include "surface/manifest.hpp"
#include "surface/synth.hpp"
#include "surface/taxonomy.hpp"

using namespace surface;
using surface::testing::read_file;
using surface::testing::TempDir;
using surface::testing::write_file;

namespace {

std::string error_of(const std::filesystem::path& p) {
  try {
    load_manifest(p);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

Manifest random_manifest(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Manifest m{"random", {}};
  std::size_t seq = 0, frame = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng() % 7 == 0) {
      const std::string path = "web/img" + std::to_string(i) + ".jpg";
      m.records.push_back({path, kAllClasses[rng() % kNumClasses], SourceId::websearch, path, 0});
      continue;
    }
    if (rng() % 10 == 0) ++seq, frame = 0;
    frame += 1 + rng() % 3;
    const SourceId src = kAllSources[rng() % 6];
    m.records.push_back({"seq" + std::to_string(seq) + "/f" + std::to_string(frame) + ".png",
                         kAllClasses[seq % kNumClasses], src, "seq" + std::to_string(seq), frame});
  }
  return m;
}

}  // namespace

TEST(Taxonomy, NamesRoundTrip) {
  for (SurfaceClass c : kAllClasses) {
    EXPECT_EQ(parse_class(to_string(c)), c);
    EXPECT_EQ(class_from_index(class_index(c)), c);
  }
  for (SourceId s : kAllSources) EXPECT_EQ(parse_source(to_string(s)), s);
  EXPECT_FALSE(parse_class("gravel"));
  EXPECT_FALSE(class_from_index(kNumClasses));
  EXPECT_EQ(class_index(SurfaceClass::asphalt), 0u);
  EXPECT_EQ(class_index(SurfaceClass::snow), 5u);
}

TEST(Manifest, LoadsWellFormedFile) {
  TempDir dir;
  write_file(dir / "m.csv", std::string(kManifestHeader) +
                                "\na/1.png,asphalt,kitti,s1,0\na/2.png,asphalt,kitti,s1,4\n"
                                "w/x.jpg,snow,websearch,w/x.jpg,0\n");
  const Manifest m = load_manifest(dir / "m.csv");
  EXPECT_EQ(m.name, "m");
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.records[1], (SampleRecord{"a/2.png", SurfaceClass::asphalt, SourceId::kitti, "s1", 4}));
  EXPECT_EQ(m.records[2].source, SourceId::websearch);
}

TEST(Manifest, UnknownClassNamesRow) {
  TempDir dir;
  write_file(dir / "m.csv", std::string(kManifestHeader) + "\na.png,asphalt,kitti,s,0\nb.png,gravel,kitti,s,1\n");
  const std::string err = error_of(dir / "m.csv");
  EXPECT_NE(err.find("row 3"), std::string::npos) << err;
  EXPECT_NE(err.find("gravel"), std::string::npos) << err;
}

TEST(Manifest, RejectsMalformedInput) {
  TempDir dir;
  const std::string h = std::string(kManifestHeader) + "\n";
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"", "empty"},
      {"path,label\n", "header"},
      {h + "a.png,asphalt,kitti,s\n", "5 fields"},
      {h + "a.png,asphalt,mars,s,0\n", "unknown source"},
      {h + "a.png,asphalt,kitti,s,x\n", "bad frame index"},
      {h + "a.png,asphalt,kitti,s,-1\n", "bad frame index"},
      {h + "a.png,asphalt,kitti,s,0\na.png,dirt,kitti,t,0\n", "duplicate"},
      {h + "a.png,asphalt,kitti,s,3\nb.png,asphalt,kitti,s,3\n", "frame index"},
      {h + "a.png,asphalt,websearch,other,0\n", "web-search"},
      {h + ",asphalt,kitti,s,0\n", "empty image path"},
  };
  for (const auto& [text, needle] : cases) {
    write_file(dir / "m.csv", text);
    const std::string err = error_of(dir / "m.csv");
    EXPECT_NE(err.find(needle), std::string::npos) << "input: " << text << "\nerror: " << err;
  }
  EXPECT_NE(error_of(dir / "missing.csv").find("cannot open"), std::string::npos);
}

TEST(Manifest, SaveRejectsCommaInPath) {
  TempDir dir;
  Manifest m{"m", {{"a,b.png", SurfaceClass::dirt, SourceId::nrec, "s", 0}}};
  EXPECT_THROW(save_manifest(m, dir / "m.csv"), DataError);
}

TEST(Manifest, RoundTripProperty) {
  TempDir dir;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Manifest m = random_manifest(1000, seed);
    save_manifest(m, dir / "m.csv");
    const Manifest back = load_manifest(dir / "m.csv");
    EXPECT_EQ(back.records, m.records);
    // Byte-stable: saving what was loaded reproduces the file.
    const std::string first = read_file(dir / "m.csv");
    save_manifest(back, dir / "again.csv");
    EXPECT_EQ(read_file(dir / "again.csv"), first);
  }
}

TEST(Manifest, OutputUsesLineFeeds) {
  TempDir dir;
  save_manifest(random_manifest(20, 1), dir / "m.csv");
  const std::string text = read_file(dir / "m.csv");
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_EQ(text.substr(0, text.find('\n')), kManifestHeader);
}

TEST(Manifest, TableShapedCounts) {
  const Manifest m = table_shaped_manifest(table1_counts());
  const ClassCounts c = class_counts(m);
  EXPECT_EQ(c, (ClassCounts{10273, 8547, 2887, 3668, 1082, 3075}));
  EXPECT_NO_THROW(validate_manifest(m));
  EXPECT_NEAR(imbalance_ratio(m), 10273.0 / 1082.0, 1e-12);
  EXPECT_NEAR(imbalance_ratio(m), 9.4945, 1e-3);
}

TEST(Manifest, ImbalanceRatioNamesEmptyClass) {
  Manifest m{"m", {{"a.png", SurfaceClass::asphalt, SourceId::kitti, "s", 0}}};
  try {
    imbalance_ratio(m);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dirt"), std::string::npos) << e.what();
  }
}
