// Default HyperCroc memory map and register offsets for assembly firmware.

#define SOCCTRL     0x03000000
#define SOC_EXIT    0x0
#define SOC_PUTC    0x4
#define UART        0x03002000
#define UART_TX     0x0
#define UART_STATUS 0x4
#define TIMER       0x03003000
#define MTIME       0x0
#define MTIMEH      0x4
#define MTIMECMP    0x8
#define MTIMECMPH   0xC
#define IDMA0       0x03005000
#define IDMA1       0x03005100
#define HYPER0_CFG  0x03006000
#define HYPER1_CFG  0x03006100
#define SRAM0       0x10000000
#define SRAM1       0x10002000
#define SRAM2       0x10004000
#define SRAM3       0x10006000
#define USER        0x20000000
#define PHY0        0x80000000
#define PHY1        0x90000000

#define DMA_SRC        0x00
#define DMA_DST        0x04
#define DMA_LENGTH     0x08
#define DMA_SRC_STRIDE 0x0C
#define DMA_DST_STRIDE 0x10
#define DMA_REPS       0x14
#define DMA_CONF       0x18
#define DMA_STATUS     0x1C
#define DMA_NEXT_ID    0x20
#define DMA_DONE_ID    0x24

#define CSUM_SRC    0x00
#define CSUM_LEN    0x04
#define CSUM_CTRL   0x08
#define CSUM_STATUS 0x0C
#define CSUM_SUM    0x10

#define REG_CS   0x10
#define REG_ADDR 0x14
#define REG_DATA 0x18

// exit(code): never returns
.macro EXIT code
    li t6, SOCCTRL
    li t5, ((\code) << 1) | 1
    sw t5, SOC_EXIT(t6)
1:  j 1b
.endm

// exit with the value held in a register
.macro EXIT_REG reg
    slli t5, \reg, 1
    ori t5, t5, 1
    li t6, SOCCTRL
    sw t5, SOC_EXIT(t6)
1:  j 1b
.endm

// launch the job staged in the iDMA at \base and spin until it is done;
// leaves the job id in t1, clobbers t2
.macro DMA_RUN base
    lw t1, DMA_NEXT_ID(\base)
1:  lw t2, DMA_DONE_ID(\base)
    bne t2, t1, 1b
.endm
