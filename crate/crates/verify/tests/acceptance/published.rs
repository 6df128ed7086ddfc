//! Published simulation and real-data results used as reference values.

/// `(bias, mse)` per loss (clad, wme, logcosh) x family (normal, laplace, t3,
/// hetero) x n (100, 500, 1000) x parameter (beta0, beta1, beta2, rho1).
pub const SIM: [[[[(f64, f64); 4]; 3]; 4]; 3] = [
    // clad
    [
        [
            [(0.0810, 0.1879), (0.0049, 0.0296), (0.0027, 0.5169), (0.1920, 0.5222)],
            [(0.0070, 0.0272), (0.0014, 0.0054), (0.0014, 0.0723), (0.0206, 0.0745)],
            [(-0.1738, 0.0137), (-0.0190, 0.0027), (-0.0071, 0.0347), (0.0084, 0.0358)],
        ],
        [
            [(0.0736, 0.1786), (0.0073, 0.0277), (-0.1701, 0.5676), (0.1852, 0.5972)],
            [(0.0036, 0.0218), (0.0020, 0.0041), (-0.0132, 0.0572), (0.0185, 0.0598)],
            [(0.0015, 0.0092), (-0.0002, 0.0019), (-0.0069, 0.0233), (0.0076, 0.0240)],
        ],
        [
            [(0.0957, 0.1987), (0.0058, 0.0353), (-0.2062, 0.5455), (0.2212, 0.5658)],
            [(0.0151, 0.0329), (-0.0007, 0.0065), (-0.0312, 0.0890), (0.0329, 0.0926)],
            [(0.0005, 0.0151), (0.0014, 0.0030), (-0.0065, 0.0365), (0.0088, 0.0374)],
        ],
        [
            [(-0.1627, 1.7615), (0.1272, 0.6128), (-0.0878, 4.3088), (0.3137, 4.3402)],
            // printed as "0.0.759"
            [(-0.0300, 0.1583), (0.0362, 0.0759), (-0.0145, 0.5081), (0.0545, 0.4822)],
            [(0.0042, 0.0591), (0.0114, 0.0333), (-0.0376, 0.1904), (0.0533, 0.1714)],
        ],
    ],
    // wme
    [
        [
            [(0.0379, 0.3325), (0.0082, 0.0253), (-0.1104, 1.2365), (0.1293, 1.2554)],
            [(-0.0026, 0.0246), (0.0042, 0.0048), (-0.0045, 0.0554), (0.0089, 0.0571)],
            [(-0.0024, 0.0122), (0.0006, 0.0022), (0.0002, 0.0280), (0.0067, 0.0288)],
        ],
        [
            [(0.0266, 0.3187), (0.0111, 0.0369), (-0.0978, 0.9666), (0.1114, 0.9796)],
            [(-0.0056, 0.0340), (0.0039, 0.0063), (-0.0060, 0.0739), (0.0139, 0.0756)],
            [(-0.0054, 0.0158), (0.0003, 0.0031), (0.0032, 0.0336), (-0.0004, 0.0339)],
        ],
        [
            [(0.0135, 0.3838), (0.0054, 0.0383), (-0.0889, 1.2553), (0.1171, 1.2894)],
            [(-0.0016, 0.0374), (0.0030, 0.0067), (-0.0115, 0.0856), (0.0151, 0.0881)],
            [(0.0011, 0.0175), (-0.0020, 0.0032), (-0.0003, 0.0369), (0.0004, 0.0381)],
        ],
        [
            [(-1.1275, 20.079), (0.3399, 1.8527), (0.6269, 44.104), (0.0500, 41.828)],
            [(-0.1567, 0.5843), (0.0703, 0.1782), (0.0623, 1.1576), (0.0430, 1.0513)],
            [(-0.0744, 0.2252), (0.0298, 0.0746), (0.0320, 0.5140), (0.0183, 0.4585)],
        ],
    ],
    // logcosh
    [
        [
            [(0.1054, 1.2096), (-0.0135, 0.0196), (-0.1607, 4.8477), (0.1327, 4.8370)],
            [(0.0675, 0.0228), (-0.0222, 0.0041), (-0.0493, 0.0495), (0.0142, 0.0495)],
            [(0.0617, 0.0128), (-0.0209, 0.0023), (-0.0367, 0.0252), (-0.0006, 0.0245)],
        ],
        [
            [(0.1154, 0.2681), (-0.0274, 0.0254), (-0.1341, 0.9023), (0.0922, 0.8955)],
            [(0.0773, 0.0270), (-0.0227, 0.0053), (-0.0545, 0.0586), (0.0103, 0.0571)],
            [(0.0788, 0.0172), (-0.0269, 0.0030), (-0.0496, 0.0303), (0.0025, 0.0284)],
        ],
        [
            [(0.0514, 9.9126), (-0.0253, 0.0656), (0.0875, 26.956), (-0.1251, 27.044)],
            [(0.1325, 1.0520), (-0.0199, 0.0298), (-0.1821, 2.4272), (0.1428, 2.4430)],
            [(0.0861, 0.0315), (-0.0281, 0.0062), (-0.0599, 0.0709), (0.0122, 0.0688)],
        ],
        [
            [(-0.0934, 5.0210), (0.0462, 0.6100), (-0.0720, 15.164), (0.2349, 15.246)],
            [(0.1349, 0.1680), (-0.1007, 0.0775), (-0.0568, 0.5177), (0.0117, 0.4699)],
            [(0.1551, 0.0912), (-0.1219, 0.0469), (-0.0723, 0.2482), (-0.0071, 0.2057)],
        ],
    ],
];

/// Real-data CLAD bootstrap MSE at B=500, regressors in fit order
/// (age, educ, exper, expersq, kidslt6, kidsge6, nwifeinc, residual).
pub const MROZ_CLAD_BMSE: [f64; 8] = [0.7118, 0.5898, 0.4927, 1.8319, 2.9191, 0.7251, 0.8463, 1.6876];
