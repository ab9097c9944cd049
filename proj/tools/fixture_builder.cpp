// Authoring helper for replay fixtures.
//
//   fixture_builder transcript --config C --responses DIR --out FILE
//       Runs the pipeline once, answering the LLM calls with the files in DIR
//       (sorted by name, one response per file) and records the request
//       fingerprints the pipeline actually produces into FILE.
//   fixture_builder templates --out DIR
//       Writes the built-in templates as <ID>.prompt files.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>

#include "autoresearch/config.hpp"
#include "autoresearch/llm_gateway.hpp"
#include "autoresearch/pipeline.hpp"
#include "autoresearch/prompt_kit.hpp"

namespace fs = std::filesystem;
using namespace autoresearch;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int build_transcript(const fs::path& config_path, const fs::path& responses_dir, const fs::path& out) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(responses_dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("no response files in " + responses_dir.string());

    Transcript blind;
    for (const auto& f : files) {
        TranscriptEntry entry;
        entry.response.content = read_file(f);
        blind.entries.push_back(std::move(entry));
    }

    PipelineConfig config = load_config(config_path);
    const fs::path scratch = fs::temp_directory_path() / ("fixture_builder-" + std::to_string(::getpid()));
    config.outputs_dir = scratch;
    PipelineEngine engine(config, templates_for(config));

    auto backend = std::make_unique<ReplayBackend>(blind, false);
    ReplayBackend* raw = backend.get();
    fs::path trial_dir;
    int status = 0;
    try {
        TrialRecord rec = engine.run_trial(problem_for(config), std::move(backend), true);
        trial_dir = rec.trial_dir;
        std::cerr << "outcome " << to_json(rec.outcome).dump() << "\n";
    } catch (const TrialError& e) {
        trial_dir = e.trial_dir();
        std::cerr << "trial error: " << e.what() << "\n";
        status = 1;
    }
    if (raw->remaining() != 0) {
        std::cerr << raw->remaining() << " response file(s) were not consumed\n";
        status = 1;
    }
    fs::create_directories(out.parent_path().empty() ? fs::path(".") : out.parent_path());
    fs::copy_file(trial_dir / "transcript.jsonl", out, fs::copy_options::overwrite_existing);
    fs::remove_all(scratch);
    return status;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Replay fixture authoring helper", "fixture_builder"};
    app.require_subcommand(1);

    std::string config, responses, out;
    CLI::App* transcript = app.add_subcommand("transcript", "Record a transcript from canned responses");
    transcript->add_option("--config", config)->required();
    transcript->add_option("--responses", responses)->required();
    transcript->add_option("--out", out)->required();

    std::string templates_out;
    CLI::App* templates = app.add_subcommand("templates", "Write the built-in templates");
    templates->add_option("--out", templates_out)->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (transcript->parsed()) return build_transcript(config, responses, out);
        write_templates(default_templates(), templates_out);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "fixture_builder: " << e.what() << "\n";
        return 1;
    }
}
