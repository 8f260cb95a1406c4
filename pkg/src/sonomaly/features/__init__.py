from .aep import export_embeddings, import_embeddings
from .convnet import ConvStack
from .extractor import ExtractorSpec, ReferenceExtractor, block_names, reference_extract
from .pyramid import CoordMap, FeatureMapPyramid, PatchGrid, align_and_concat, bilinear_resize

__all__ = [
    "export_embeddings",
    "import_embeddings",
    "ConvStack",
    "ExtractorSpec",
    "ReferenceExtractor",
    "block_names",
    "reference_extract",
    "CoordMap",
    "FeatureMapPyramid",
    "PatchGrid",
    "align_and_concat",
    "bilinear_resize",
]
