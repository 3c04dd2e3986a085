# Published best-performing encoder strings (five per task), used as
# canonical fixtures: inpainting rows expand with 3 channels, denoising rows
# with 1 channel, both at 64x64.
REFERENCE_INPAINTING_ARCHS = [
    "CS(128,3)-C(64,3)-CS(128,5)-C(128,1)-CS(256,5)-C(256,1)-CS(64,5)",
    "C(256,3)-CS(64,1)-C(128,3)-CS(256,5)-CS(64,1)-C(64,3)-CS(128,5)",
    "CS(128,5)-CS(256,3)-C(64,1)-CS(128,3)-CS(64,5)-CS(64,1)-C(128,5)-C(256,5)",
    "CS(128,3)-CS(64,3)-C(64,5)-CS(256,3)-C(128,3)-CS(128,5)-CS(64,1)-CS(64,1)",
    "CS(64,1)-C(128,5)-CS(64,3)-C(64,1)-CS(256,5)-C(128,5)",
]
REFERENCE_DENOISING_ARCHS = [
    "CS(64,3)-C(64,1)-C(128,3)-CS(64,1)-CS(128,5)-C(128,3)-C(64,1)",
    "CS(64,5)-CS(256,1)-C(256,1)-C(64,3)-CS(128,1)-C(64,3)-CS(128,1)-C(128,3)",
    "CS(64,3)-C(64,1)-C(128,3)-CS(64,1)-CS(128,5)-C(128,3)-C(64,1)",
    "CS(128,3)-CS(64,1)-C(64,3)-C(64,3)-CS(64,1)-C(64,3)",
    "CS(64,5)-CS(128,1)-CS(256,3)-CS(128,1)-CS(128,1)-C(64,1)-CS(64,3)",
]
