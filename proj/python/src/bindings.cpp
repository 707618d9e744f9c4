// Copyright 2026 The AMSR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// amsr._core: images cross as numpy arrays (H x W x 3 uint8, or H x W
// float64 for single planes); reports cross as JSON text.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "amsr/checkpoint.hpp"
#include "amsr/commands.hpp"
#include "amsr/errors.hpp"

namespace py = pybind11;
using namespace amsr;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ImageU8 to_image(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an H x W x 3 uint8 array");
  ImageU8 img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.pixels.data(), a.data(), img.pixels.size());
  return img;
}

U8Array from_image(const ImageU8& img) {
  U8Array out({img.height, img.width, 3});
  std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
  return out;
}

ImagePlanar to_plane(const F64Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected an H x W float array");
  ImagePlanar img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 1);
  std::memcpy(img.planes[0].data(), a.data(), img.planes[0].size() * sizeof(double));
  return img;
}

F64Array from_planes(const ImagePlanar& img) {
  if (img.plane_count() == 1) {
    F64Array out({img.height, img.width});
    std::memcpy(out.mutable_data(), img.planes[0].data(), img.planes[0].size() * sizeof(double));
    return out;
  }
  F64Array out({img.height, img.width, img.plane_count()});
  auto v = out.mutable_unchecked<3>();
  for (int p = 0; p < img.plane_count(); ++p) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) v(y, x, p) = img.at(p, x, y);
    }
  }
  return out;
}

ImagePlanar to_ycbcr_planes(const F64Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an H x W x 3 float array");
  ImagePlanar img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 3);
  auto v = a.unchecked<3>();
  for (int p = 0; p < 3; ++p) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) img.at(p, x, y) = v(y, x, p);
    }
  }
  return img;
}

EdgeMode edge_mode(const std::string& name) {
  if (name == "reflect") return EdgeMode::kReflect;
  if (name == "clamp") return EdgeMode::kClamp;
  throw ConfigError("edge must be 'reflect' or 'clamp', got '" + name + "'");
}

py::dict record_dict(const MetricRecord& r) {
  py::dict d;
  d["image_id"] = r.image_id;
  d["psnr_db"] = r.psnr_db;
  d["ssim"] = r.ssim;
  d["scale"] = r.scale;
  d["shave"] = r.shave;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Single-image super-resolution toolkit";
  m.attr("__version__") = tool_version();

  // Translators are tried newest first, so the base class goes in first.
  auto base = py::register_exception<Error>(m, "AmsrError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<ContractError>(m, "ContractError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<IntegrityError>(m, "IntegrityError", base);
  py::register_exception<NumericError>(m, "NumericError", base);

  // images
  m.def("load_png", [](const fs::path& p) { return from_image(load_png(p)); }, py::arg("path"));
  m.def("save_png", [](const fs::path& p, const U8Array& a) { save_png(p, to_image(a)); }, py::arg("path"),
        py::arg("image"));
  m.def("rgb_to_ycbcr", [](const U8Array& a) { return from_planes(rgb_to_ycbcr(to_image(a))); }, py::arg("image"));
  m.def("ycbcr_to_rgb", [](const F64Array& a) { return from_image(ycbcr_to_rgb(to_ycbcr_planes(a))); },
        py::arg("ycbcr"));
  m.def("luma", [](const U8Array& a) { return from_planes(luma(to_image(a))); }, py::arg("image"));
  m.def("cubic_kernel", &cubic_kernel, py::arg("x"));
  m.def(
      "resize_plane",
      [](const F64Array& a, int out_w, int out_h, bool antialias, const std::string& edge) {
        return from_planes(bicubic_resize(to_plane(a), out_w, out_h, antialias, edge_mode(edge)));
      },
      py::arg("plane"), py::arg("out_w"), py::arg("out_h"), py::arg("antialias") = true, py::arg("edge") = "reflect");
  m.def(
      "resize_image",
      [](const U8Array& a, int out_w, int out_h, bool antialias, const std::string& edge) {
        return from_image(bicubic_resize(to_image(a), out_w, out_h, antialias, edge_mode(edge)));
      },
      py::arg("image"), py::arg("out_w"), py::arg("out_h"), py::arg("antialias") = true, py::arg("edge") = "reflect");
  m.def("modcrop", [](const U8Array& a, int scale) { return from_image(modcrop(to_image(a), scale)); },
        py::arg("image"), py::arg("scale"));
  m.def("make_lr", [](const U8Array& a, int scale) { return from_image(make_lr(to_image(a), scale)); },
        py::arg("hr"), py::arg("scale"));

  // metrics
  m.def("psnr", [](const F64Array& a, const F64Array& b, int shave) { return psnr(to_plane(a), to_plane(b), shave); },
        py::arg("a"), py::arg("b"), py::arg("shave") = 0);
  m.def("ssim", [](const F64Array& a, const F64Array& b, int shave) { return ssim(to_plane(a), to_plane(b), shave); },
        py::arg("a"), py::arg("b"), py::arg("shave") = 0);
  m.def(
      "evaluate_pair",
      [](const U8Array& hr, const U8Array& sr, int scale, const std::string& id) {
        return record_dict(evaluate_pair(to_image(hr), to_image(sr), scale, id));
      },
      py::arg("hr"), py::arg("sr"), py::arg("scale"), py::arg("image_id") = "");

  // commands
  m.def(
      "degrade",
      [](const fs::path& manifest, int scale, const fs::path& out_dir) {
        DegradeResult r;
        {
          py::gil_scoped_release release;
          r = cmd_degrade(manifest, scale, out_dir);
        }
        py::dict d;
        d["written"] = r.written;
        d["failures"] = r.failures;
        d["manifest"] = r.manifest;
        return d;
      },
      py::arg("manifest"), py::arg("scale"), py::arg("out_dir"));
  m.def(
      "evaluate_json",
      [](const fs::path& manifest, int scale, const std::string& method, std::optional<fs::path> checkpoint,
         std::optional<fs::path> save_dir, int threads) {
        EvalOptions opt;
        opt.manifest = manifest;
        opt.scale = scale;
        opt.method = method;
        opt.checkpoint = std::move(checkpoint);
        opt.save_dir = std::move(save_dir);
        opt.threads = threads;
        py::gil_scoped_release release;
        return report_json(cmd_eval(opt));
      },
      py::arg("manifest"), py::arg("scale"), py::arg("method") = "bicubic", py::arg("checkpoint") = py::none(),
      py::arg("save_dir") = py::none(), py::arg("threads") = 0);
  m.def("render_report_table", &render_report_table, py::arg("report_json"));
  m.def(
      "train",
      [](const fs::path& config, std::optional<fs::path> resume) {
        const TrainJob job = load_train_job(config);
        py::gil_scoped_release release;
        return cmd_train(job, resume).step_losses;
      },
      py::arg("config"), py::arg("resume") = py::none());
  m.def(
      "infer",
      [](const fs::path& checkpoint, const fs::path& in, const fs::path& out) {
        py::gil_scoped_release release;
        cmd_infer(checkpoint, in, out);
      },
      py::arg("checkpoint"), py::arg("input"), py::arg("output"));
  m.def(
      "upscale",
      [](const fs::path& checkpoint, const U8Array& lr) {
        const Checkpoint ck = load_checkpoint(checkpoint);
        const Model<float> model(ck.config, ck.params);
        const ImageU8 img = to_image(lr);
        ImageU8 sr;
        {
          py::gil_scoped_release release;
          sr = upscale_with_model(model, img);
        }
        return from_image(sr);
      },
      py::arg("checkpoint"), py::arg("lr"));
  m.def(
      "gradcheck",
      [](bool corrupt_conv, std::uint64_t seed) {
        GradCheckOutcome out;
        {
          py::gil_scoped_release release;
          out = cmd_gradcheck(corrupt_conv, seed);
        }
        return py::make_tuple(out.result.passed(), out.summary);
      },
      py::arg("corrupt_conv") = false, py::arg("seed") = 2024);
  m.def(
      "compute_mean", [](const fs::path& manifest) { return cmd_mean(manifest).mean_rgb; }, py::arg("manifest"));
  m.def(
      "param_count",
      [](std::optional<std::string> text) {
        const ModelConfig cfg = text ? ModelConfig::from_canonical_text(*text) : ModelConfig::toy();
        return build_model<float>(cfg, 1).count();
      },
      py::arg("config_text") = py::none());
  m.def("toy_config_text", [](int scale) { return ModelConfig::toy(scale).canonical_text(); }, py::arg("scale") = 2);
}
