#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rlrt/cli_io.hpp"
#include "rlrt/commands.hpp"

namespace {

using namespace rlrt;

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rlrt_cli_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write_text(const std::filesystem::path& path, const std::string& text) { std::ofstream(path) << text; }

TEST(ReadMatrix, DelimitersHeaderAndComments) {
  std::istringstream comma("# comment\nx,y\n1,2\n\n3,4\n");
  const Matrix a = io::read_matrix(comma);
  ASSERT_EQ(a.rows(), 2);
  EXPECT_EQ(a(1, 0), 3.0);
  std::istringstream tabs("1\t2\t3\n4\t5\t6\n");
  EXPECT_EQ(io::read_matrix(tabs).cols(), 3);
  std::istringstream blanks("  1   2\n3 4  \n");
  EXPECT_EQ(io::read_matrix(blanks)(1, 1), 4.0);
  std::istringstream semis("1;2\r\n3;4\r\n");
  EXPECT_EQ(io::read_matrix(semis)(0, 1), 2.0);
}

TEST(ReadMatrix, Transpose) {
  std::istringstream in("1,2,3\n4,5,6\n");
  const Matrix m = io::read_matrix(in, "<t>", true);
  EXPECT_EQ(m.rows(), 3);
  EXPECT_EQ(m(2, 1), 6.0);
}

TEST(ReadMatrix, ErrorsCarryLineAndColumn) {
  std::istringstream bad("1,2\n3,oops\n");
  try {
    io::read_matrix(bad, "data.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 3u);
    EXPECT_NE(std::string(e.what()).find("data.csv:2:3"), std::string::npos);
  }
  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW(io::read_matrix(ragged), ParseError);
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(io::read_matrix(empty), ParseError);
  std::istringstream inf("1,inf\n");
  EXPECT_THROW(io::read_matrix(inf), ParseError);
}

TEST(ReadMatrix, RoundTripIsLossless) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal;
  Matrix m(20, 7);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(gen) * std::pow(10.0, static_cast<double>(j) - 3.0);
  std::stringstream buf;
  io::write_matrix(buf, m);
  const Matrix back = io::read_matrix(buf);
  EXPECT_EQ(back, m);
}

TEST(ReadDataFile, MissingFileNamesPath) {
  try {
    io::read_data_file("/nonexistent/file.csv");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/file.csv"), std::string::npos);
  }
}

TEST(Record, JsonRoundTrip) {
  io::Record r;
  r.set("method", std::string("rlrt(0.5)"))
      .set("n", std::int64_t{400})
      .set("z", 0.1 + 0.2)
      .set("tiny", 1e-300)
      .set("reject", false);
  io::Provenance prov{"test", 3, "a=1;", ""};
  const auto back = io::records_from_json(io::to_json({r}, prov));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], r);
}

TEST(Record, CsvUsesSeventeenDigits) {
  io::Record r;
  r.set("x", 0.1).set("label", std::string("a,b"));
  const auto text = io::to_csv({r}, {"test", 0, "", ""});
  EXPECT_NE(text.find("0.10000000000000001,\"a,b\""), std::string::npos);
  EXPECT_NE(text.find("# tool=rlrt 1.0.0"), std::string::npos);
  EXPECT_NE(text.find("# config_hash="), std::string::npos);
}

TEST(Provenance, HashTracksConfig) {
  io::Provenance a{"simulate", 1, "reps=10;", ""}, b{"simulate", 1, "reps=11;", ""};
  EXPECT_NE(a.config_hash(), b.config_hash());
  EXPECT_EQ(a.config_hash(), io::Provenance({"x", 9, "reps=10;", ""}).config_hash());
  EXPECT_EQ(io::hex64(io::fnv1a64("")), "cbf29ce484222325");
}

TEST(WriteFileAtomically, LeavesNoTemporary) {
  const auto path = scratch("atomic.csv");
  io::write_file_atomically(path, "hello\n");
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "hello");
  auto tmp = path;
  tmp += ".tmp";
  EXPECT_FALSE(std::filesystem::exists(tmp));
}

TEST(Commands, MethodAndBetaGridParsing) {
  EXPECT_EQ(cmd::parse_method("rlrt(0.2)", 0.5), MethodSpec::rlrt(0.2));
  EXPECT_EQ(cmd::parse_method("rlrt", 0.7), MethodSpec::rlrt(0.7));
  EXPECT_THROW(cmd::parse_method("rlrt(x)", 0.5), DomainError);
  EXPECT_THROW(cmd::parse_method("bogus", 0.5), DomainError);
  EXPECT_EQ(cmd::expand_methods({"rlrt", "lw"}, {0.2, 0.8}).size(), 3u);
  const auto grid = cmd::parse_beta_grid("0.8:4.0:0.4");
  ASSERT_EQ(grid.size(), 9u);
  EXPECT_DOUBLE_EQ(grid.back(), 0.8 + 8 * 0.4);
  EXPECT_EQ(cmd::parse_beta_grid("2,1,2"), (std::vector<double>{1.0, 2.0}));
  EXPECT_THROW(cmd::parse_beta_grid("1:0:1"), DomainError);
}

TEST(Commands, TestScalarHandCase) {
  const auto path = scratch("three.csv");
  write_text(path, "0\n1\n2\n");
  cmd::TestConfig cfg;
  cfg.input = path;
  const auto out = cmd::cmd_test(cfg);
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(std::get<double>(out.records[0].at("raw")), 0.0);
  EXPECT_EQ(out.exit_code, cmd::kSuccess);
}

TEST(Commands, ExitOnReject) {
  const auto path = scratch("spiked.csv");
  std::ostringstream text;
  rng::Stream stream({1, 0, 0});
  io::write_matrix(text, mc::sample_mvn(100, mc::materialize_sigma(Scenario::a2(), 20), stream).values());
  write_text(path, text.str());
  cmd::TestConfig cfg;
  cfg.input = path;
  cfg.methods = {MethodSpec::clrt()};
  cfg.exit_on_reject = true;
  EXPECT_EQ(cmd::cmd_test(cfg).exit_code, cmd::kReject);
  cfg.exit_on_reject = false;
  EXPECT_EQ(cmd::cmd_test(cfg).exit_code, cmd::kSuccess);
}

TEST(Commands, NullParamsAtLambdaOne) {
  cmd::NullParamsConfig cfg{1.0, 161, 80, io::Format::Json};
  const auto out = cmd::cmd_null_params(cfg);
  EXPECT_NEAR(std::get<double>(out.records[0].at("mu")), -std::log(0.5) / 2.0, 1e-15);
  EXPECT_NEAR(std::get<double>(out.records[0].at("v")), -1.0 - 2.0 * std::log(0.5), 1e-15);
  EXPECT_THROW(cmd::cmd_null_params({0.5, 41, 40, io::Format::Csv}), RegimeError);
}

TEST(Commands, PowerCurveCloseSpikeHandling) {
  cmd::PowerCurveConfig cfg;
  cfg.lambda = 0.4;
  cfg.n = 81;
  cfg.p = 40;
  cfg.betas = {0.5, 2.0};
  cfg.reps = 50;
  EXPECT_THROW(cmd::cmd_power_curve(cfg), CloseSpikeError);
  cfg.allow_close_spike = true;
  const auto out = cmd::cmd_power_curve(cfg);
  ASSERT_EQ(out.records.size(), 2u);
  EXPECT_TRUE(std::get<bool>(out.records[0].at("close_spike")));
  EXPECT_FALSE(std::get<bool>(out.records[1].at("close_spike")));
  EXPECT_EQ(out.warnings.size(), 1u);
}

TEST(Commands, SimulateRejectsZeroReps) {
  cmd::SimulateConfig cfg;
  cfg.grid = cmd::default_grid();
  cfg.grid.reps = 0;
  EXPECT_THROW(cmd::cmd_simulate(cfg), DomainError);
}

}  // namespace
