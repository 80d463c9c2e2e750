#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hypertree/experiment.hpp"

using namespace hypertree;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("hypertree_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<Diagnostic> check(const std::string& suite, const std::string& text) {
  std::istringstream in(text);
  std::vector<Diagnostic> diags;
  auto spec = parse_spec(in, suite, diags);
  if (!diags.empty()) return diags;
  return validate(spec);
}

bool mentions(const std::vector<Diagnostic>& d, const std::string& needle) {
  for (const auto& x : d)
    if (x.str().find(needle) != std::string::npos) return true;
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

RunResult run_text(const std::string& suite, const std::string& text, const fs::path& out, int threads = 1) {
  std::istringstream in(text);
  RunOptions o;
  o.out = out;
  o.threads = threads;
  return run(suite, in, o);
}

}  // namespace

TEST(Spec, Diagnostics) {
  EXPECT_TRUE(mentions(check("protocol", "rho = 0.5\n"), "noise at channel capacity zero"));
  EXPECT_TRUE(mentions(check("protocol", "rho = 0.6\n"), "rho must lie in (0, 1/2)"));
  const double logm = std::log(2.0);
  EXPECT_TRUE(check("collapse", "R = 8\ntrials = 1\neta = " + fmt17(0.2 * logm) + "\n").empty());
  EXPECT_TRUE(mentions(check("collapse", "R = 8\neta = " + fmt17(0.3 * logm) + "\n"), "eta"));
  const auto cap = check("wavelet", "m = 2\nR = 30\nleaf_cap = 1000\n");
  EXPECT_TRUE(mentions(cap, "required cap >= 1073741824"));
  EXPECT_TRUE(mentions(cap, "spec:2: R:"));
  const auto dup = check("embed", "m = 3\n# comment\nm = 4\nfoo = 1\n");
  EXPECT_TRUE(mentions(dup, "spec:3: m: duplicate key (first set on line 1)"));
  EXPECT_TRUE(mentions(dup, "spec:4: foo: unknown key"));
  EXPECT_TRUE(mentions(check("embed", "R = 6..x\n"), "bad range"));
  EXPECT_TRUE(mentions(check("embed", "suite = wavelet\n"), "not 'embed'"));
  EXPECT_TRUE(mentions(check("protocol", "mode = protocol\nrepresentation = euclidean\n"), "child membership"));
  EXPECT_TRUE(mentions(check("embed", "m = 3\nkappa = 1\nc_k = 0.6\n"), "curvature condition fails"));
  EXPECT_TRUE(check("embed", "m = 3\nkappa = 100\nc_k = 0.6\n").empty());
}

TEST(Run, WaveletSuiteSmall) {
  TempDir dir("wavelet");
  const auto rr = run_text("wavelet", "m = 2\nR = 4\nk = 1,4\nsubspaces = 10\n", dir.path);
  ASSERT_EQ(rr.exit_code, 0) << rr.error;
  const auto rows = lines_of(slurp(dir.path / "wavelets.csv"));
  EXPECT_EQ(rows.size(), 16u);  // header + 15
  EXPECT_EQ(lines_of(slurp(dir.path / "alignment.csv")).size(), 21u);
  const auto summary = ojson::parse(slurp(dir.path / "summary.json"));
  EXPECT_TRUE(summary["pass"].get<bool>());
  EXPECT_LE(summary["metrics"]["gram"][0]["gram_deviation"].get<double>(), 1e-10);
  const auto spec = ojson::parse(slurp(dir.path / "spec.json"));
  EXPECT_EQ(spec["params"]["R"], ojson::array({4}));
}

TEST(Run, EmptyGridWritesHeaderOnly) {
  TempDir dir("empty");
  const auto rr = run_text("embed", "R =\n", dir.path);
  ASSERT_EQ(rr.exit_code, 0) << rr.error;
  const auto rows = lines_of(slurp(dir.path / "embed.csv"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].rfind("m,R,k,", 0), 0u);
}

TEST(Run, EmbedSmallPassesAndDumps) {
  TempDir dir("embed");
  const auto rr = run_text("embed", "m = 3\nR = 3\nk = 2,3\n", dir.path, 2);
  ASSERT_EQ(rr.exit_code, 0) << rr.error;
  const auto rows = lines_of(slurp(dir.path / "embed.csv"));
  ASSERT_EQ(rows.size(), 3u);
  const auto dump = lines_of(slurp(dir.path / "embedding_m3_R3_k3.csv"));
  EXPECT_EQ(dump[0], "node_id,coord_0,coord_1,coord_2,polar_radius");
  EXPECT_EQ(dump.size(), 1u + 40u);
  const auto side = ojson::parse(slurp(dir.path / "embedding_m3_R3_k2.json"));
  EXPECT_LE(side["distortion"]["D"].get<double>(), 1.1);
}

TEST(Run, SpecErrorWritesNothing) {
  TempDir dir("bad");
  const auto rr = run_text("protocol", "rho = 0.5\n", dir.path);
  EXPECT_EQ(rr.exit_code, 1);
  EXPECT_FALSE(fs::exists(dir.path / "spec.json"));
  EXPECT_EQ(run_text("nonsense", "", dir.path).exit_code, 1);
}

TEST(Run, FailureRemovesPartialOutputs) {
  TempDir dir("partial");
  fs::create_directories(dir.path);
  // The suite fails after spec.json was written: the embed dump file name is
  // taken by a directory, so opening it throws.
  fs::create_directories(dir.path / "embedding_m3_R2_k2.csv");
  const auto rr = run_text("embed", "m = 3\nR = 2\n", dir.path);
  EXPECT_EQ(rr.exit_code, 1);
  EXPECT_FALSE(rr.error.empty());
  EXPECT_FALSE(fs::exists(dir.path / "spec.json"));
  EXPECT_FALSE(fs::exists(dir.path / "embed.csv"));
}

TEST(Run, AcceptanceFailureExitCode) {
  TempDir dir("fail");
  // Fixed curvature far below what distortion 1.1 needs.
  const auto rr = run_text("embed", "m = 3\nR = 3\nkappa = 0.05\n", dir.path);
  EXPECT_EQ(rr.exit_code, 2);
  EXPECT_TRUE(fs::exists(dir.path / "summary.json"));
  EXPECT_FALSE(ojson::parse(slurp(dir.path / "summary.json"))["pass"].get<bool>());
}

TEST(Run, ByteIdenticalAcrossRunsAndThreads) {
  TempDir a("det_a"), b("det_b");
  const std::string spec = "m = 2\nR = 8..10\ntrials = 3\n";
  ASSERT_EQ(run_text("collapse", spec, a.path, 1).exit_code, 0);
  ASSERT_EQ(run_text("collapse", spec, b.path, 3).exit_code, 0);
  for (const char* f : {"collapse.csv", "summary.json", "spec.json"}) EXPECT_EQ(slurp(a.path / f), slurp(b.path / f)) << f;
}

TEST(Run, CollapseRowReplay) {
  TempDir dir("replay");
  ASSERT_EQ(run_text("collapse", "m = 2\nR = 9\ntrials = 4\nk = 3\n", dir.path).exit_code, 0);
  const auto rows = lines_of(slurp(dir.path / "collapse.csv"));
  ASSERT_EQ(rows.size(), 5u);
  const auto t = build_mary(2, 9, 1.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<std::string> cells;
    std::stringstream ss(rows[i]);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    const auto seed = std::stoull(cells[5]);
    const auto col = find_collision(t, embed_euclidean(t, 3, 1.0, EuclideanStrategy::random_uniform, seed), 0.1);
    EXPECT_EQ(cells[7], fmt17(col.euclid_dist));
    EXPECT_EQ(cells[9], fmt17(col.corr_dist));
  }
}

TEST(Run, ProtocolRowsAndKl) {
  TempDir dir("protocol");
  const auto rr = run_text("protocol", "m = 4\nR = 3..5\ntrials = 100\nkl_samples = 20000\n", dir.path, 2);
  ASSERT_NE(rr.exit_code, 1) << rr.error;
  const auto rows = lines_of(slurp(dir.path / "protocol.csv"));
  EXPECT_EQ(rows.size(), 4u);
  const auto summary = ojson::parse(slurp(dir.path / "summary.json"));
  bool saw_kl = false;
  for (const auto& c : summary["checks"])
    if (c["name"] == "kl_within_cap") saw_kl = c["pass"].get<bool>();
  EXPECT_TRUE(saw_kl);
}

TEST(Run, EnvLeafCapOverride) {
  TempDir dir("env");
  ::setenv("HYPERTREE_LEAF_CAP", "100", 1);
  const auto rr = run_text("wavelet", "m = 2\nR = 7\nk = 1\nsubspaces = 1\n", dir.path);
  ::unsetenv("HYPERTREE_LEAF_CAP");
  EXPECT_EQ(rr.exit_code, 1);
  ASSERT_FALSE(rr.diagnostics.empty());
  EXPECT_TRUE(mentions(rr.diagnostics, "required cap >= 128"));
}
