#include <qcchain/record_io.hpp>

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
   int         code{0};
   std::string out;
   std::string err;
};

fs::path scratch() {
   static fs::path dir = [] {
      auto p = fs::temp_directory_path() / "qcchain_cli_test";
      fs::remove_all(p);
      fs::create_directories(p);
      return p;
   }();
   return dir;
}

Result cli(const std::string& args) {
   const auto out = scratch() / "stdout", err = scratch() / "stderr";
   std::string cmd = std::string(QCCHAIN_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
   int         status = std::system(cmd.c_str());
   Result      r;
   r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
   r.out  = qcchain::read_file(out.string());
   r.err  = qcchain::read_file(err.string());
   return r;
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
   std::map<std::string, std::string> files;
   for (const auto& e : fs::directory_iterator(dir))
      files[e.path().filename().string()] = qcchain::read_file(e.path().string());
   return files;
}

} // namespace

TEST(Cli, RunIsReproducible) {
   auto a = scratch() / "r1", b = scratch() / "r2";
   const std::string flags = " --seed 42 --nodes 10 --transactions 60";
   ASSERT_EQ(cli("run rationality" + flags + " --out " + a.string()).code, 0);
   ASSERT_EQ(cli("run rationality" + flags + " --out " + b.string()).code, 0);
   auto fa = dir_contents(a), fb = dir_contents(b);
   EXPECT_EQ(fa, fb);
   EXPECT_TRUE(fa.count("scores.csv"));
   EXPECT_EQ(cli("verify " + a.string()).code, 0);
}

TEST(Cli, VerifyRejectsTamperedLedger) {
   auto dir = scratch() / "tamper";
   ASSERT_EQ(cli("run reputation_separation --nodes 8 --transactions 10 --out " + dir.string()).code, 0);
   auto text = qcchain::read_file((dir / "ledger.txt").string());
   auto pos  = text.find("S:");
   ASSERT_NE(pos, std::string::npos);
   text[pos + 2] = static_cast<char>(text[pos + 2] ^ 1);
   qcchain::write_file((dir / "ledger.txt").string(), text);
   fs::remove(dir / "manifest.json"); // the chain alone must catch it
   auto r = cli("verify " + dir.string());
   EXPECT_NE(r.code, 0);
   auto err = json::parse(r.err);
   EXPECT_EQ(err["error"], "integrity_violation");
}

TEST(Cli, CommitteeHistogramSchema) {
   auto dir = scratch() / "hist";
   ASSERT_EQ(cli("run committee_distribution --repetitions 10 --nodes 30 --out " + dir.string()).code, 0);
   std::ifstream in(dir / "committee_distribution.csv");
   std::string   line;
   std::getline(in, line);
   EXPECT_EQ(line, "malicious_fraction,bucket,count");
   std::map<std::string, int> per_fraction;
   std::set<std::string>      buckets;
   while (std::getline(in, line)) {
      auto a = line.find(','), b = line.rfind(',');
      per_fraction[line.substr(0, a)] += std::stoi(line.substr(b + 1));
      buckets.insert(line.substr(a + 1, b - a - 1));
   }
   EXPECT_EQ(buckets, (std::set<std::string>{"[0,10)", "[10,20)", "[20,30)", "[30,40)", "[40,50)"}));
   EXPECT_EQ(per_fraction.size(), 3u);
   auto summary = json::parse(qcchain::read_file((dir / "summary.json").string()));
   for (const auto& row : summary["rows"]) {
      int total = row["at_or_above_half"].get<int>();
      for (int c : row["buckets"])
         total += c;
      EXPECT_EQ(total, 10);
   }
}

TEST(Cli, ReportIsPure) {
   auto dir = scratch() / "rep";
   ASSERT_EQ(cli("run epsilon_response --nodes 8 --transactions 40 --out " + dir.string()).code, 0);
   auto before = dir_contents(dir);
   auto a      = cli("report " + dir.string());
   auto b      = cli("report " + dir.string());
   ASSERT_EQ(a.code, 0);
   EXPECT_EQ(a.out, b.out);
   EXPECT_EQ(a.out.rfind("scenario,run,metric,value\n", 0), 0u);
   EXPECT_EQ(dir_contents(dir), before);
}

TEST(Cli, ErrorsAreMachineReadable) {
   auto bad = scratch() / "bad.json";
   qcchain::write_file(bad.string(), R"({"nodes": 5, "typo": 1})");
   auto r = cli("run rationality --config " + bad.string() + " --out " + (scratch() / "x").string());
   EXPECT_NE(r.code, 0);
   EXPECT_EQ(json::parse(r.err)["error"], "parse_error");

   auto tiny = cli("run rationality --nodes 2 --out " + (scratch() / "y").string());
   EXPECT_NE(tiny.code, 0);
   EXPECT_EQ(json::parse(tiny.err)["error"], "infeasible_scenario");

   auto unknown = cli("run nothing --out " + (scratch() / "z").string());
   EXPECT_NE(unknown.code, 0);
   EXPECT_TRUE(json::parse(unknown.err).contains("error"));
}

TEST(Cli, GenerateWritesDataset) {
   auto dir = scratch() / "gen";
   ASSERT_EQ(cli("generate --seed 3 --out " + dir.string()).code, 0);
   auto csv = qcchain::read_file((dir / "dataset.csv").string());
   EXPECT_EQ(csv.rfind("artifact,references,drawn,endorsed\n", 0), 0u);
   EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1001);
}
