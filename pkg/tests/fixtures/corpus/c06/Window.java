public class Window {
    private int mWidth;
    private String mCaption;

    private void draw(String caption, int width) {
    }

    public void render() {
        <start>draw(caption, width);<end>
    }
}
