#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "wavebem/simulation.hpp"

using namespace wavebem;

int main(int argc, char** argv) {
  CLI::App app{"Ship wave simulation with a fully nonlinear BEM free-surface model"};
  std::string config, resume, out;
  std::optional<double> froude, t_end;
  std::optional<std::size_t> max_dofs;
  bool quiet = false;
  app.add_option("--config", config, "INI scenario file")->required();
  app.add_option("--froude", froude, "Froude number, overrides [hull] froude");
  app.add_option("--t-end", t_end, "end time in s, overrides [solver] t_end");
  app.add_option("--max-dofs", max_dofs, "DOF ceiling, overrides [adapt] max_dofs");
  app.add_option("--resume", resume, "checkpoint to continue from");
  app.add_option("--out", out, "output directory, overrides [output] dir");
  app.add_flag("--quiet", quiet, "no progress lines");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::vector<ConfigOverride> overrides;
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  if (froude) overrides.push_back({"hull", "froude", num(*froude)});
  if (t_end) overrides.push_back({"solver", "t_end", num(*t_end)});
  if (max_dofs) overrides.push_back({"adapt", "max_dofs", std::to_string(*max_dofs)});
  if (!out.empty()) overrides.push_back({"output", "dir", out});

  try {
    RunOptions opts;
    opts.log = quiet ? nullptr : &std::cout;
    std::unique_ptr<Simulation> sim;
    const Scenario from_file = load_scenario(config, overrides);
    if (resume.empty()) {
      sim = std::make_unique<Simulation>(from_file, opts);
    } else {
      const Checkpoint c = load_checkpoint(resume);
      sim = std::make_unique<Simulation>(c, overrides, opts);
      if (effective_config(sim->scenario()) != effective_config(from_file))
        std::cerr << "note: continuing with the configuration stored in the checkpoint\n";
    }
    const RunSummary s = sim->run();
    std::cout << "finished (" << s.reason << ") at t = " << s.t << " s after " << s.accepted_steps
              << " steps, " << s.rejected_steps << " rejected, " << s.adapt_cycles << " adapt cycles, "
              << s.n_dofs << " dofs, max |eta| = " << s.max_abs_eta << " m\n";
    if (s.exit_code == 5) std::cerr << "wall-clock limit reached; checkpoint written to " << sim->out_dir() << "\n";
    return s.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
