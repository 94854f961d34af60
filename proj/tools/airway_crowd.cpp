// airway-crowd: command-line driver for the crowdsourced airway annotation pipeline.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "airway_crowd/config.hpp"
#include "airway_crowd/phantom.hpp"
#include "airway_crowd/pipeline.hpp"
#include "airway_crowd/server.hpp"

namespace ac = airway_crowd;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::string volume;
  std::string sites;
  std::string out;
  std::string log;
  std::string truth;
  std::optional<std::uint64_t> seed;
  std::optional<int> min_annotations;
  std::optional<double> pair_distance_max;
  std::optional<int> annotations_per_image;
  bool include_multi_pair{false};
};

ac::PipelineConfig resolve(const Overrides& o) {
  ac::PipelineConfig cfg;
  if (const char* env = std::getenv("AIRWAY_CROWD_DATA"); env != nullptr && *env != '\0') {
    cfg.out = env;
  }
  if (!o.config.empty()) cfg.apply(ac::load_config_file(o.config));
  if (!o.volume.empty()) cfg.volume = o.volume;
  if (!o.sites.empty()) cfg.sites = o.sites;
  if (!o.out.empty()) cfg.out = o.out;
  if (!o.log.empty()) cfg.log = o.log;
  if (!o.truth.empty()) cfg.truth = o.truth;
  if (o.seed) cfg.seed = *o.seed;
  if (o.min_annotations) cfg.aggregate.min_annotations = *o.min_annotations;
  if (o.pair_distance_max) cfg.qc.pair_distance_max = *o.pair_distance_max;
  if (o.annotations_per_image) cfg.annotations_per_image = *o.annotations_per_image;
  if (o.include_multi_pair) cfg.include_multi_pair = true;
  cfg.qc.image_side = cfg.slice.side;
  cfg.validate();
  return cfg;
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ac::ValidationError(what + " path is required");
  if (!fs::exists(p)) throw ac::NotFoundError(what + " not found: " + p.string());
}

ac::AnnotationServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Crowdsourced airway annotation pipeline.\n"
      "Defaults: slice 50x50 px, window [-950, 550] HU, Keys cubic (a=-0.5) sampling at the\n"
      "minimum voxel spacing; 10 images per HIT, target 10 annotations per image; pairs\n"
      "farther than 10 px apart are rejected; no-airway corner circle = radius <= 3 px within\n"
      "5 px of a corner; images need >= 3 usable annotations to be aggregated (median).\n"
      "The data directory defaults to $AIRWAY_CROWD_DATA, else ./airway_crowd_data."};
  app.require_subcommand(1);

  Overrides o;
  app.add_option("--config", o.config, "key = value config file ([slice], [hits], [qc], ...)");
  app.add_option("--volume", o.volume, "CT volume header (.mhd)");
  app.add_option("--sites", o.sites, "expert site CSV");
  app.add_option("--out", o.out, "data/output directory");
  app.add_option("--log", o.log, "annotation log (default <out>/annotations.jsonl)");
  app.add_option("--seed", o.seed, "random seed for simulation (default 20160601)");
  app.add_option("--min-annotations", o.min_annotations,
                 "usable annotations required to aggregate an image (default 3)");
  app.add_option("--pair-distance-max", o.pair_distance_max,
                 "max centre distance of a lumen/wall pair in px (default 10)");
  app.add_option("--annotations-per-image", o.annotations_per_image,
                 "simulated annotations per image (default 10)");

  auto* reslice = app.add_subcommand("reslice", "render 4 views per site + manifest");
  auto* make_hits = app.add_subcommand("make-hits", "bundle images into HITs (hits.json)");
  auto* serve = app.add_subcommand("serve", "run the annotation HTTP server");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string instructions;
  std::string static_dir;
  serve->add_option("--host", host, "bind address (default 127.0.0.1)");
  serve->add_option("--port", port, "port, 0 = any free port (default 8080)");
  serve->add_option("--instructions", instructions, "instructions text file");
  serve->add_option("--static", static_dir, "directory of static UI assets");

  auto* simulate = app.add_subcommand("simulate", "write a simulated annotation log");
  simulate->add_option("--truth", o.truth, "per-image ground truth JSON (default: expert areas)");
  auto* qc = app.add_subcommand("qc", "classify annotations (qc.csv, qc_tally.json)");
  auto* measure = app.add_subcommand("measure", "lumen/wall areas of single-pair annotations");
  measure->add_flag("--include-multi-pair", o.include_multi_pair,
                    "also measure the largest-lumen pair of multi-pair annotations");
  auto* aggregate = app.add_subcommand("aggregate", "per-image medians (aggregates.csv)");
  auto* evaluate = app.add_subcommand("evaluate", "expert-vs-crowd Pearson report");
  auto* report = app.add_subcommand("report", "qc + measure + aggregate + evaluate, printed");

  int tubes = 20;
  auto* phantom = app.add_subcommand("phantom", "write a synthetic tube phantom, sites and truth");
  phantom->add_option("--tubes", tubes, "number of tubes (default 20)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(o);

    if (*reslice) {
      require_file(cfg.volume, "volume");
      require_file(cfg.sites, "sites");
      const auto manifest = ac::pipeline::reslice(cfg);
      std::cout << "wrote " << manifest.size() << " images to "
                << ac::pipeline::images_dir(cfg.out).string() << '\n';
    } else if (*make_hits) {
      const auto hits = ac::pipeline::make_hits(cfg);
      std::cout << "wrote " << hits.size() << " HITs to "
                << ac::pipeline::hits_path(cfg.out).string() << '\n';
    } else if (*serve) {
      ac::ServerConfig sc;
      sc.host = host;
      sc.port = port;
      sc.data_dir = cfg.out;
      sc.instructions_path = instructions;
      sc.static_dir = static_dir;
      sc.hit_config = cfg.hits;
      sc.qc_config = cfg.qc;
      ac::AnnotationServer server(sc);
      const int bound = server.bind();
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cout << "listening on http://" << host << ":" << bound << std::endl;
      server.serve();
      g_server = nullptr;
    } else if (*simulate) {
      if (cfg.truth.empty()) require_file(cfg.sites, "sites");
      const auto records = ac::pipeline::simulate(cfg);
      std::cout << "wrote " << records.size() << " annotations to " << cfg.log_path().string()
                << '\n';
    } else if (*qc) {
      const auto result = ac::pipeline::qc(cfg);
      std::cout << ac::pipeline::tally_line(result.tally) << '\n';
    } else if (*measure) {
      const auto ms = ac::pipeline::measure(cfg);
      std::cout << "wrote " << ms.size() << " measurements\n";
    } else if (*aggregate) {
      const auto aggs = ac::pipeline::aggregate(cfg);
      std::cout << "wrote " << aggs.size() << " aggregated images\n";
    } else if (*evaluate) {
      require_file(cfg.sites, "sites");
      for (const auto& r : ac::pipeline::evaluate(cfg)) {
        std::cout << ac::pipeline::report_row(r) << '\n';
      }
    } else if (*report) {
      require_file(cfg.sites, "sites");
      const auto result = ac::pipeline::qc(cfg);
      ac::pipeline::measure(cfg);
      ac::pipeline::aggregate(cfg);
      const auto reports = ac::pipeline::evaluate(cfg);
      std::cout << "qc: " << ac::pipeline::tally_line(result.tally) << '\n'
                << "orientation_group,quantity,level,n,r\n";
      for (const auto& r : reports) std::cout << ac::pipeline::report_row(r) << '\n';
    } else if (*phantom) {
      fs::create_directories(cfg.out);
      const auto spec = ac::tube_grid_phantom(tubes, cfg.seed);
      const auto volume = ac::generate_phantom(spec);
      const auto volume_path = cfg.out / "phantom.mhd";
      ac::write_volume(volume, volume_path);
      std::vector<ac::AirwaySite> sites;
      ac::json truth = ac::json::array();
      const double step_mm = cfg.slice.sample_step * volume.min_spacing();
      for (const auto& t : spec.tubes) {
        sites.push_back(ac::tube_site(t));
        for (const auto view : ac::kAllViews) {
          truth.push_back(ac::to_json(ac::tube_view_truth(t, view, step_mm, cfg.slice.side)));
        }
      }
      ac::write_sites(sites, cfg.out / "sites.csv");
      std::ofstream(cfg.out / "truth.json") << truth.dump(1) << '\n';
      std::cout << "wrote " << volume_path.string() << ", " << (cfg.out / "sites.csv").string()
                << ", " << (cfg.out / "truth.json").string() << '\n';
    }
  } catch (const ac::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
