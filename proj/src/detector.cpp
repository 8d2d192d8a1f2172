#include "plabel/detector.hpp"

#include <cstdlib>

#include "plabel/digest.hpp"
#include "plabel/error.hpp"

namespace plabel {

DetectorHandle DetectorHandle::synthetic(const SyntheticModel& model) {
  model.validate();
  DetectorHandle h;
  h.kind = DetectorKind::Synthetic;
  h.model = model;
  return h;
}

DetectorHandle DetectorHandle::external_adapter(const ExternalSpec& spec) {
  if (spec.command.empty()) fail(ErrorKind::Config, "external detector command is empty");
  if (spec.workdir.empty()) fail(ErrorKind::Config, "external detector needs a workdir");
  if (spec.timeout.count() <= 0) fail(ErrorKind::Config, "detector timeout must be positive");
  DetectorHandle h;
  h.kind = DetectorKind::External;
  h.external = spec;
  h.external->workdir = std::filesystem::absolute(spec.workdir);
  return h;
}

namespace {

std::vector<std::string> child_env(const ExternalSpec& spec,
                                   const std::filesystem::path& model_dir) {
  std::vector<std::string> env;
  for (const auto& name : spec.env_allowlist) {
    if (name == "PLABEL_MODEL_DIR") continue;
    if (const char* v = std::getenv(name.c_str())) env.push_back(name + "=" + v);
  }
  if (!model_dir.empty()) env.push_back("PLABEL_MODEL_DIR=" + model_dir.string());
  return env;
}

void run_adapter(const DetectorHandle& h, const std::string& verb,
                 const std::filesystem::path& data,
                 const std::filesystem::path& out,
                 const std::filesystem::path& model_dir,
                 const std::filesystem::path& log_stem) {
  const ExternalSpec& spec = *h.external;
  std::vector<std::string> argv = spec.command;
  argv.insert(argv.end(), {verb, "--data", data.string(), "--out", out.string()});
  std::lock_guard lock(*h.process_lock);
  const auto result = detail::run_process(argv, spec.workdir,
                                          child_env(spec, model_dir),
                                          spec.timeout, log_stem);
  if (result.exit_status != 0) {
    fail(ErrorKind::Detector, "adapter " + verb + " exited with status " +
                                  std::to_string(result.exit_status) +
                                  "; stderr: " + result.stderr_text);
  }
}

}  // namespace

DetectorHandle train(const DetectorHandle& handle,
                     const DatasetSnapshot& train_set, int threads) {
  if (train_set.split() != Split::Train) {
    fail(ErrorKind::Config, "detector training needs a Train split");
  }
  DetectorHandle next = handle;
  next.generation = handle.generation + 1;

  if (handle.kind == DetectorKind::Synthetic) {
    next.state = fit_synthetic(*handle.model, train_set, threads);
    Sha256 h;
    h.field("synthetic").field(handle.model->seed);
    h.field(static_cast<std::uint64_t>(next.generation));
    for (auto c : next.state.counts) h.field(static_cast<std::uint64_t>(c));
    next.artifact_tag = h.hex();
    return next;
  }

  const ExternalSpec& spec = *handle.external;
  const auto dir = spec.workdir / ("train-" + std::to_string(next.generation));
  const auto data = dir / "dataset.json";
  const auto model_dir = dir / "model";
  save_dataset(train_set.without_hidden_truth(), data);
  std::error_code ec;
  std::filesystem::create_directories(model_dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + model_dir.string());
  run_adapter(handle, "train", data, model_dir, handle.model_dir, dir / "train");
  next.model_dir = model_dir;
  Sha256 h;
  h.field("external").field(static_cast<std::uint64_t>(next.generation));
  h.field(directory_digest(model_dir));
  next.artifact_tag = h.hex();
  return next;
}

std::vector<Detection> infer(const DetectorHandle& handle,
                             const DatasetSnapshot& images, int threads) {
  if (!handle.trained()) fail(ErrorKind::Config, "infer called before train");
  if (handle.kind == DetectorKind::Synthetic) {
    return detail::synthetic_infer(*handle.model, handle.state,
                                   handle.artifact_tag, images, threads);
  }

  const std::string body = dataset_to_json(images.without_hidden_truth());
  const auto dir = handle.external->workdir /
                   ("infer-" + std::to_string(handle.generation) + "-" +
                    sha256_hex(body).substr(0, 12));
  const auto data = dir / "dataset.json";
  const auto out = dir / "detections.jsonl";
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string());
  save_dataset(images.without_hidden_truth(), data);
  std::filesystem::remove(out, ec);
  run_adapter(handle, "infer", data, out, handle.model_dir, dir / "infer");
  return read_detections(out);
}

}  // namespace plabel
