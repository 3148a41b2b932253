// gestalt_serve -- HTTP service for the drawing and click-line games.
//
// Configuration comes from the environment (see config_from_env) and can be
// overridden on the command line.

#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "gestalt/service.hpp"

int main(int argc, char** argv) {
  gestalt::ServiceConfig cfg;
  try {
    cfg = gestalt::config_from_env();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Game service"};
  app.add_option("--host", cfg.host)->capture_default_str();
  app.add_option("--port", cfg.port)->capture_default_str();
  app.add_option("--archive", cfg.archive_path)->capture_default_str();
  app.add_option("--n-cap", cfg.n_cap)->capture_default_str();
  app.add_option("--static-dir", cfg.static_dir);
  app.add_option("--seed", cfg.seed, "Session seed (0: random)")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Detector threads per request")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    gestalt::GameService service(cfg);
    httplib::Server server;
    service.mount(server);
    if (service.archive().skipped_lines() > 0)
      std::cerr << "archive: skipped " << service.archive().skipped_lines() << " unreadable line(s)\n";
    std::cerr << "listening on " << cfg.host << ":" << cfg.port << " (" << service.archive().size()
              << " archived entries)\n";
    if (!server.listen(cfg.host, cfg.port)) {
      std::cerr << "error: cannot listen on " << cfg.host << ":" << cfg.port << "\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
