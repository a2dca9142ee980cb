"""Reference values frozen from an independent computation (tools/derive_oracles.py: sympy and mpmath)."""
POTENTIAL_CUSP_1_1 = 1.75
HESSIAN_CUSP_ORIGIN = [[0.0, 0.0], [0.0, 1.0]]
HESSIAN_FOLD_1_5 = [[2.0, 0.0], [0.0, 1.0]]
ELLIPTIC_POINTS_X_1_0 = [(-1.0, 0.0), (1.0, 0.0)]
ELLIPTIC_POINTS_X_M1_0 = [(0.0, -1.0), (0.0, 1.0)]
ELLIPTIC_POINTS_X_0_1 = [(-0.7071067811865476, 0.7071067811865476), (0.7071067811865476, -0.7071067811865476)]
PERTURBED_POINTS_X_0_0 = [(-1.0, 0.0), (0.0, 0.0), (0.5, -0.8660254037844386), (0.5, 0.8660254037844386)]
CUSP_DET_HESS_AT_1_HALF = 0.0
CUSP_CAUSTIC_IMAGE_1_HALF = [2.0, 1.5]
POLAR_X0_RHO1_PI6 = [0.0, -1.0]
FOLD_LINE_Y1_AT_T1 = -0.7615941559557649
PERTURBED_AXIS_Y1 = [[0.5, -0.5868137146675919], [1.0, -1.1291534094361928], [2.0, -1.5531049563972046], [4.0, -1.6172703920995526]]
PERTURBED_AXIS_Y1_BACKWARD = [[-0.5, 0.36980630381715507], [-1.0, 0.530329756621528], [-2.0, 0.6083200584862979], [-4.0, 0.6179225489966254]]
PERTURBED_AXIS_POINTS = {'1/2': [(-1.3660254037844386, 0.0), (0.36602540378443865, 0.0), (0.5, -0.5), (0.5, 0.5)], '-1/8': [(-0.8535533905932737, 0.0), (-0.14644660940672624, 0.0), (0.5, -0.9354143466934853), (0.5, 0.9354143466934853)], '1': [(-1.618033988749895, 0.0), (0.6180339887498949, 0.0)]}
