#include <qcchain/error.hpp>
#include <qcchain/harness.hpp>
#include <qcchain/record_io.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

using namespace qcchain;
using nlohmann::json;

namespace {

int fail(std::string_view code, const std::string& message) {
   std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
   return 2;
}

struct Common {
   std::string                  config;
   std::optional<std::uint64_t> seed;
   std::optional<std::size_t>   repetitions;
   std::optional<std::size_t>   nodes;
   std::optional<double>        malicious;
   std::optional<std::size_t>   transactions;
   std::string                  out;
};

void add_common(CLI::App* cmd, Common& c) {
   cmd->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
   cmd->add_option("--seed", c.seed, "Global seed");
   cmd->add_option("--repetitions", c.repetitions, "Repetitions (committee_distribution trials)");
   cmd->add_option("--nodes", c.nodes, "Node count");
   cmd->add_option("--malicious", c.malicious, "Malicious node fraction");
   cmd->add_option("--transactions", c.transactions, "Transactions to run");
}

ScenarioConfig load_config(std::optional<Scenario> s, const Common& c) {
   ScenarioConfig cfg = ScenarioConfig::defaults(s.value_or(Scenario::rationality));
   if (!c.config.empty()) {
      json doc;
      try {
         doc = json::parse(read_file(c.config));
      } catch (const json::exception& e) {
         throw Error(ErrorCode::parse_error, c.config + ": " + e.what());
      }
      cfg = apply_config(doc, cfg);
      if (s && cfg.scenario != *s)
         throw Error(ErrorCode::invalid_argument, "config names scenario '" + std::string(to_string(cfg.scenario)) +
                                                      "' but the command asks for '" + std::string(to_string(*s)) + "'");
   }
   if (c.seed)
      cfg.seed = *c.seed;
   if (c.repetitions)
      cfg.repetitions = *c.repetitions;
   if (c.nodes)
      cfg.nodes = *c.nodes;
   if (c.malicious)
      cfg.malicious_fraction = *c.malicious;
   if (c.transactions)
      cfg.transactions = *c.transactions;
   cfg.validate();
   return cfg;
}

} // namespace

int main(int argc, char** argv) {
   CLI::App app{"qcchain experiment harness"};
   app.require_subcommand(1);

   Common gen_opts, run_opts;
   auto*  gen = app.add_subcommand("generate", "Generate a synthetic citation dataset");
   add_common(gen, gen_opts);
   gen->add_option("--out", gen_opts.out, "Output directory (default: stdout CSV)");

   std::string scenario_name;
   auto*       run = app.add_subcommand("run", "Run one scenario and write its outputs");
   run->add_option("scenario", scenario_name, "Scenario name")->required();
   add_common(run, run_opts);
   run->add_option("--out", run_opts.out, "Output directory")->required();

   std::string verify_dir;
   auto*       verify = app.add_subcommand("verify", "Audit a saved run directory");
   verify->add_option("dir", verify_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

   std::vector<std::string> report_dirs;
   std::string              report_out;
   auto*                    report = app.add_subcommand("report", "Merge run summaries into one table");
   report->add_option("dirs", report_dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
   report->add_option("--out", report_out, "Output CSV (default: stdout)");

   try {
      app.parse(argc, argv);
   } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0)
         return app.exit(e);
      return fail("usage_error", e.what());
   }

   try {
      if (*gen) {
         auto cfg = load_config(std::nullopt, gen_opts);
         auto ds  = generate_dataset(scenario_dataset(cfg));
         auto csv = dataset_csv(ds);
         if (gen_opts.out.empty()) {
            std::cout << csv;
         } else {
            std::filesystem::create_directories(gen_opts.out);
            write_file(gen_opts.out + "/dataset.csv", csv);
            write_file(gen_opts.out + "/dag.txt", encode_dag(to_dag(ds, cfg.scoring.initial_score)));
         }
         return 0;
      }
      if (*run) {
         auto s = parse_scenario(scenario_name);
         if (!s)
            return fail("invalid_argument", "unknown scenario '" + scenario_name + "'");
         auto cfg = load_config(*s, run_opts);
         auto out = run_scenario(cfg);
         write_run(run_opts.out, cfg, out);
         std::cout << out.summary.dump(2) << '\n';
         return 0;
      }
      if (*verify) {
         auto rep = audit_run(verify_dir);
         json j{{"ok", rep.ok}, {"blocks", rep.blocks}, {"artifacts", rep.artifacts}, {"problems", rep.problems}};
         std::cout << j.dump(2) << '\n';
         if (!rep.ok) {
            std::cerr << json{{"error", "integrity_violation"}, {"problems", rep.problems}}.dump() << '\n';
            return 1;
         }
         return 0;
      }
      if (*report) {
         auto csv = merge_reports(report_dirs);
         if (report_out.empty())
            std::cout << csv;
         else
            write_file(report_out, csv);
         return 0;
      }
   } catch (const Error& e) {
      return fail(to_string(e.code()), e.what());
   } catch (const std::exception& e) {
      return fail("internal_error", e.what());
   }
   return 0;
}
