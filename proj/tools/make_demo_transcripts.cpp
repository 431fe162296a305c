// Regenerates the bundled demo fixtures: the scripted mutator transcript and
// the canned inference responses referenced by assets/configs/demo.json. Run
// it after changing the demo config, the seed template, or the scripted
// mutator, so the replay files keep matching what the CLI will ask for.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "promptmut/clients.hpp"
#include "promptmut/jsonio.hpp"
#include "promptmut/mutator_loop.hpp"
#include "promptmut/stats.hpp"
#include "promptmut/store.hpp"
#include "promptmut/template_model.hpp"
#include "promptmut/validation.hpp"

#include "mock_mutator.hpp"

namespace fs = std::filesystem;
using namespace promptmut;

namespace {

// Which instances each model answers correctly, per template index. The
// demo's mean pass rates (and everything downstream: Z, MPI, W, IoU) follow
// from this table plus the replay oracle's normalized comparison.
const std::map<std::string, std::vector<std::set<std::string>>> kPassSets = {
    {"model-a",
     {{"i000", "i001", "i002"},
      {"i000", "i001", "i002"},
      {"i000", "i001"},
      {"i001", "i002"},
      {"i000", "i001", "i002"}}},
    {"model-b", {{"i000", "i002"}, {"i001"}, {"i000", "i001", "i002"}, {}, {"i002"}}},
};

// Plausible near-misses for the failing cells (wrong order, wrong case,
// off-by-one) so failures come from the comparison, not from extraction.
const std::map<std::string, std::string> kNearMisses = {
    {"i000", "[1, 2, 3]"},
    {"i001", "ok!"},
    {"i002", "9"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regenerate the demo replay transcripts"};
    std::string assets = "assets";
    app.add_option("--assets", assets, "path to the assets directory");
    CLI11_PARSE(app, argc, argv);

    fs::path assets_dir = fs::absolute(assets);
    fs::path config_path = assets_dir / "configs" / "demo.json";
    RunConfig cfg = parse_run_config(parse_json_file(config_path), config_path.parent_path());

    MetaTemplate seed = parse_meta_template(parse_json_file(cfg.meta_template_path));
    StubEmbedder embedder;
    mock::ScriptedMutator scripted;
    LoopResult grown = run_mutation_loop(seed, scripted, cfg.mutator_decode, embedder,
                                         cfg.validation, cfg.budget, cfg.threshold);

    fs::path transcripts = assets_dir / "transcripts";
    fs::create_directories(transcripts);
    {
        std::ofstream out(transcripts / "mutator_demo.jsonl");
        std::vector<json> rows;
        for (const LoopEvent& ev : grown.transcript) rows.push_back(ev.to_json());
        for (const std::string& response : responses_from_transcript(rows)) {
            out << json{{"response", response}}.dump() << "\n";
        }
    }

    std::vector<TaskInstance> instances = load_instances(cfg.instances_path);
    {
        std::ofstream out(transcripts / "inference_demo.jsonl");
        for (const auto& [model, pass_sets] : kPassSets) {
            for (std::size_t t = 0; t < grown.pool.members.size(); ++t) {
                for (const TaskInstance& inst : instances) {
                    bool pass = pass_sets.at(t).count(inst.instance_id) > 0;
                    std::string answer = pass ? inst.judge_payload.at("expected").get<std::string>()
                                              : kNearMisses.at(inst.instance_id);
                    out << json{{"model_id", model},
                                {"template_id", template_id_for_index(t)},
                                {"instance_id", inst.instance_id},
                                {"sample_idx", 0},
                                {"response", "```\n" + answer + "\n```"}}
                               .dump()
                        << "\n";
                }
            }
        }
    }

    std::cout << "pool: " << grown.pool.members.size() << " members, "
              << grown.transcript.size() << " transcript events\n";
    for (std::size_t t = 0; t < grown.pool.members.size(); ++t) {
        const MetaTemplate& member = grown.pool.members[t];
        std::cout << "  " << template_id_for_index(t) << ": lineage " << member.lineage.size()
                  << ", distinct kinds " << distinct_op_kinds(member.lineage);
        for (const AppliedOp& op : member.lineage) std::cout << " " << op.name;
        std::cout << "\n";
    }
    std::cout << "wrote " << (transcripts / "mutator_demo.jsonl").string() << "\n";
    std::cout << "wrote " << (transcripts / "inference_demo.jsonl").string() << "\n";
    return 0;
}
