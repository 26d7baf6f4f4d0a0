#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ov/blocksched.hpp"
#include "ov/pipeline.hpp"
#include "ov/transpile.hpp"

namespace fs = std::filesystem;

namespace {

bool color_enabled() {
  const char* v = std::getenv("OV_COLOR");
  return v && std::string(v) == "1";
}

void print_diags(const ov::Diagnostics& ds, const std::string& file, bool json) {
  for (const auto& d : ds) {
    if (json)
      std::cout << ov::to_json_line(d) << "\n";
    else
      std::cerr << ov::to_text(d, file, color_enabled()) << "\n";
  }
}

// Loads and checks a program; returns exit code 0 on success, 1 on diagnostics, 2 on I/O.
int load(const std::string& path, bool json, ov::Compiled& out) {
  std::string src;
  try {
    src = ov::read_file(path);
  } catch (const std::exception& e) {
    std::cerr << "ov: " << e.what() << "\n";
    return 2;
  }
  out = ov::compile_source(src);
  print_diags(out.diags, path, json);
  return out.ok() ? 0 : 1;
}

int cmd_check(const std::vector<std::string>& files, bool json) {
  int rc = 0;
  for (const auto& f : files) {
    ov::Compiled c;
    rc = std::max(rc, load(f, json, c));
  }
  return rc;
}

int cmd_run(const std::string& file, std::uint64_t fuel, std::uint64_t seed, bool naive, bool json) {
  ov::Compiled c;
  if (int rc = load(file, false, c)) return rc;
  ov::RunOptions opts;
  opts.fuel = fuel;
  opts.seed = seed;
  opts.naive = naive;
  try {
    ov::Machine m(*c.core, opts);
    ov::FinalReport r = m.run();
    std::cout << (json ? ov::report_json(r) + "\n" : ov::report_text(r));
    if (r.outcome == ov::FinalReport::Outcome::FuelExhausted) {
      std::cerr << ov::to_text(ov::error("E-FUEL", {}, "step budget of " + std::to_string(fuel) + " exhausted"),
                               file, color_enabled())
                << "\n";
      return 3;
    }
    return r.lemma3 ? 0 : 1;
  } catch (const ov::DiagnosticError& e) {
    std::cerr << ov::to_text(e.diag(), file, color_enabled()) << "\n";
    return 1;
  }
}

int cmd_transpile(const std::string& file, const std::string& outdir, const std::string& style) {
  ov::Compiled c;
  if (int rc = load(file, false, c)) return rc;
  ov::EmitterConfig cfg;
  if (style == "pre-post")
    cfg.style = ov::EmitStyle::PrePost;
  else if (style != "ovvalidity") {
    std::cerr << "ov: unknown style '" << style << "'\n";
    return 2;
  }
  std::vector<ov::SolFile> files;
  try {
    files = ov::transpile_program(*c.surface, cfg);
  } catch (const ov::DiagnosticError& e) {
    std::cerr << ov::to_text(e.diag(), file, color_enabled()) << "\n";
    return 1;
  }
  for (auto& f : ov::bundle_api(cfg)) files.push_back(std::move(f));
  std::error_code ec;
  fs::create_directories(outdir, ec);
  for (const auto& f : files) {
    std::ofstream o(fs::path(outdir) / f.name, std::ios::binary);
    o << f.text;
    if (!o) {
      std::cerr << "ov: cannot write " << (fs::path(outdir) / f.name).string() << "\n";
      return 2;
    }
  }
  return 0;
}

int cmd_simulate(const std::string& prog, const std::string& block_path, std::optional<unsigned> workers,
                 std::optional<std::uint64_t> seed) {
  ov::Compiled c;
  if (int rc = load(prog, false, c)) return rc;
  ov::Block b;
  try {
    b = ov::parse_block(ov::read_file(block_path));
  } catch (const ov::DiagnosticError& e) {
    std::cerr << ov::to_text(e.diag(), block_path, color_enabled()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ov: " << e.what() << "\n";
    return 2;
  }
  if (workers) b.workers = *workers;
  if (seed) b.seed = *seed;
  try {
    ov::BlockRunner runner(*c.core);
    ov::MinedBlock mb = runner.mine(b);
    ov::ValidationReport vr = runner.validate(mb, b);
    nlohmann::ordered_json out = nlohmann::ordered_json::parse(ov::mined_block_json(mb));
    out["accepted"] = vr.accepted;
    if (!vr.reason.empty()) out["validator"] = vr.reason;
    std::cout << out.dump() << "\n";
    return vr.accepted ? 0 : 1;
  } catch (const ov::DiagnosticError& e) {
    std::cerr << ov::to_text(e.diag(), block_path, color_enabled()) << "\n";
    return e.diag().code == "E-TARGET" ? 2 : 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OV toolchain"};
  app.require_subcommand(1);

  std::vector<std::string> check_files;
  bool check_json = false;
  auto* check = app.add_subcommand("check", "Parse and type check programs");
  check->add_option("files", check_files)->required();
  check->add_flag("--json", check_json, "Diagnostics as JSON lines on stdout");

  std::string run_file;
  std::uint64_t fuel = 50'000'000, run_seed = 0;
  bool naive = false, run_json = false;
  auto* run = app.add_subcommand("run", "Run main and report the final state");
  run->add_option("file", run_file)->required();
  run->add_option("--fuel", fuel)->check(CLI::PositiveNumber);
  run->add_option("--seed", run_seed);
  run->add_flag("--naive", naive, "Count full-subtree checks at every call entry and exit");
  run->add_flag("--json", run_json);

  std::string tr_file, tr_out = ".", style = "ovvalidity";
  auto* tr = app.add_subcommand("transpile", "Emit Solidity plus the validity API");
  tr->add_option("file", tr_file)->required();
  tr->add_option("-o", tr_out)->required();
  tr->add_option("--style", style)->check(CLI::IsMember({"ovvalidity", "pre-post"}));

  std::string sim_prog, sim_block;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> sim_seed;
  auto* sim = app.add_subcommand("simulate", "Mine and validate a block");
  sim->add_option("program", sim_prog)->required();
  sim->add_option("block", sim_block)->required();
  sim->add_option("--workers", workers)->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*check) return cmd_check(check_files, check_json);
  if (*run) return cmd_run(run_file, fuel, run_seed, naive, run_json);
  if (*tr) return cmd_transpile(tr_file, tr_out, style);
  return cmd_simulate(sim_prog, sim_block, workers, sim_seed);
}
