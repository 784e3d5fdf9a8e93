// Command-line front end: generate the toy benchmark, run audits, fidelity
// scoring and the embedding-space decomposition attack.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "relmia/audit.hpp"

namespace {

relmia::AuditConfig load_config(const std::string& path, std::optional<std::uint64_t> seed,
                                std::optional<std::string> out_dir,
                                std::optional<std::size_t> epochs) {
  relmia::AuditConfig config = relmia::AuditConfig::from_file(path);
  if (seed) {
    config.seed = *seed;
    config.encoder.seed = *seed;
  }
  if (out_dir) config.out_dir = *out_dir;
  if (epochs) config.encoder.epochs = *epochs;
  return config;
}

void print_report_line(const relmia::AttackOutcome& a) {
  std::cout << a.scores.attack << " (" << a.scores.space << "): auc=" << a.report.auc
            << " tpr@0=" << a.report.tpr_at_0 << " tpr@1e-3=" << a.report.tpr_at_1e3
            << " tpr@1e-2=" << a.report.tpr_at_1e2 << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relmia: membership-inference auditing for multi-table synthetic data"};
  app.require_subcommand(1);

  // toy
  auto* toy = app.add_subcommand("toy", "generate the two-table toy benchmark");
  relmia::ToyRunOptions toy_opt;
  toy->add_option("--out", toy_opt.out_dir, "output directory")->required();
  toy->add_option("--members", toy_opt.spec.members, "training entity count");
  toy->add_option("--nonmembers", toy_opt.spec.nonmembers, "holdout entity count");
  toy->add_option("--member-children", toy_opt.spec.member_children,
                  "transactions per training customer");
  toy->add_option("--nonmember-children", toy_opt.spec.nonmember_children,
                  "transactions per holdout customer");
  toy->add_option("--customer-dims", toy_opt.spec.customer_dims, "customer feature count");
  toy->add_option("--transaction-dims", toy_opt.spec.transaction_dims,
                  "transaction feature count");
  toy->add_option("--seed", toy_opt.spec.seed, "data seed");
  toy->add_option("--generator", toy_opt.generator,
                  "synthetic generator: memorizing | independent");
  toy->add_option("--noise", toy_opt.noise, "memorizing generator noise scale");
  toy->add_option("--synth-seed", toy_opt.synth_seed, "generator seed");

  // audit
  auto* audit = app.add_subcommand("audit", "run the full membership-inference audit");
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> out_flag;
  std::optional<std::size_t> epochs_flag;
  audit->add_option("--config,-c", config_path, "audit config JSON")->required();
  audit->add_option("--seed", seed_flag, "override config seed");
  audit->add_option("--out-dir", out_flag, "override output directory");
  audit->add_option("--epochs", epochs_flag, "override encoder epochs");

  // decompose-attack
  auto* decomp = app.add_subcommand(
      "decompose-attack", "attack the raw row and each embedding space separately");
  std::string decomp_config;
  std::optional<std::uint64_t> decomp_seed;
  std::optional<std::string> decomp_out;
  std::optional<std::size_t> decomp_epochs;
  decomp->add_option("--config,-c", decomp_config, "audit config JSON")->required();
  decomp->add_option("--seed", decomp_seed, "override config seed");
  decomp->add_option("--out-dir", decomp_out, "override output directory");
  decomp->add_option("--epochs", decomp_epochs, "override encoder epochs");

  // fidelity
  auto* fid = app.add_subcommand("fidelity", "score synthetic data fidelity only");
  std::string fid_config;
  std::optional<std::string> fid_out;
  fid->add_option("--config,-c", fid_config, "audit config JSON")->required();
  fid->add_option("--out-dir", fid_out, "override output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (toy->parsed()) {
      relmia::run_toy(toy_opt);
      std::cout << "toy benchmark written to " << toy_opt.out_dir << "\n";
    } else if (audit->parsed()) {
      const auto config = load_config(config_path, seed_flag, out_flag, epochs_flag);
      const auto result = relmia::run_audit(config);
      for (const auto& a : result.attacks) print_report_line(a);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "reports written to " << config.out_dir << "\n";
    } else if (decomp->parsed()) {
      const auto config = load_config(decomp_config, decomp_seed, decomp_out, decomp_epochs);
      const auto result = relmia::run_decompose_attack(config);
      for (const auto& a : result.rows) print_report_line(a);
      std::cout << "reports written to " << config.out_dir << "\n";
    } else if (fid->parsed()) {
      auto config = relmia::AuditConfig::from_file(fid_config);
      if (fid_out) config.out_dir = *fid_out;
      const auto rep = relmia::run_fidelity(config);
      std::cout << "one_way=" << rep.one_way << " cardinality=" << rep.cardinality
                << " avg_hop=" << rep.avg_hop_score << "\n";
      std::cout << "fidelity report written to " << config.out_dir << "\n";
    }
  } catch (const relmia::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const relmia::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const relmia::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
